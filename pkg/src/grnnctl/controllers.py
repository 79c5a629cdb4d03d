"""Controller parameterizations: linear graph filters, GCNNs, and GRNNs.

`S` is the graph shift operator: one application moves information one hop
along the communication graph with one step of delay. The GRNN keeps a
per-node hidden state and applies `S` exactly once per time step,

    Z(t) = sigma(S Z(t-1) W + X(t) F),    U(t) = Z(t) G,

so its closed-loop information pattern respects hop-distance delays by
construction. The GCNN is memoryless: a stack of polynomial-in-S filter
layers applied to the current state, with no delay inside a time step. No
layer carries a bias; the final GCNN layer is linear so control outputs are
sign-symmetric and unbounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import Topology, normalized_adjacency, support_mask
from .linalg import rescale_spectral

NONLINEARITIES = ("tanh", "relu", "identity")


def apply_nonlinearity(tag: str, x: np.ndarray) -> np.ndarray:
    if tag == "tanh":
        return np.tanh(x)
    if tag == "relu":
        return np.maximum(x, 0.0)
    if tag == "identity":
        return x
    raise ValueError(f"unknown nonlinearity: {tag!r}")


def nonlinearity_grad_from_output(tag: str, z: np.ndarray) -> np.ndarray:
    """sigma'(pre) expressed through the activation output ``z = sigma(pre)``."""
    if tag == "tanh":
        return 1.0 - z * z
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    if tag == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown nonlinearity: {tag!r}")


@dataclass(eq=False)
class GrnnParams:
    """Trainable GRNN controller: shift S, input map F, recurrence W, readout G."""

    s: np.ndarray
    f: np.ndarray
    w: np.ndarray
    g: np.ndarray
    mask: np.ndarray | None = None
    s_trainable: bool = True
    nonlinearity: str = "tanh"

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        self.f = np.asarray(self.f, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.float64)
        n = self.s.shape[0]
        h = self.f.shape[1]
        if self.s.shape != (n, n):
            raise ValueError("S must be square")
        if self.w.shape != (h, h) or self.g.shape[0] != h:
            raise ValueError("hidden dimensions of F, W, G disagree")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity: {self.nonlinearity!r}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (n, n):
                raise ValueError("mask shape must match S")
            check_mask(self.s, self.mask)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.f.shape[1]

    @property
    def p(self) -> int:
        return self.f.shape[0]

    @property
    def q(self) -> int:
        return self.g.shape[1]

    def parameter_count(self) -> int:
        n = self.f.size + self.w.size + self.g.size
        if self.s_trainable:
            n += int(self.mask.sum()) if self.mask is not None else self.s.size
        return n


@dataclass(eq=False)
class GcnnParams:
    """Layered graph-convolutional controller with a fixed shift operator."""

    s: np.ndarray
    layers: list[list[np.ndarray]] = field(default_factory=list)
    nonlinearity: str = "tanh"

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        self.layers = [[np.asarray(h, dtype=np.float64) for h in taps] for taps in self.layers]
        for l in range(1, len(self.layers)):
            if self.layers[l][0].shape[0] != self.layers[l - 1][0].shape[1]:
                raise ValueError(f"layer {l} input width != layer {l - 1} output width")
        for taps in self.layers:
            shapes = {h.shape for h in taps}
            if len(shapes) != 1:
                raise ValueError("all taps of one layer must share a shape")

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def p(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def q(self) -> int:
        return self.layers[-1][0].shape[1]

    def parameter_count(self) -> int:
        return sum(h.size for taps in self.layers for h in taps)


@dataclass(frozen=True, eq=False)
class HiddenState:
    """Per-node hidden state Z(t) plus its step index."""

    z: np.ndarray
    t: int = -1


def check_mask(s: np.ndarray, mask: np.ndarray) -> None:
    if np.any(s[~mask] != 0.0):
        raise ValueError("S has support outside the permitted mask")


def initial_hidden(n: int, hidden_dim: int) -> HiddenState:
    return HiddenState(z=np.zeros((n, hidden_dim)), t=-1)


def graph_filter(s: np.ndarray, taps, history) -> np.ndarray:
    """Delayed graph convolution: sum_k S^k X(t-k) H_k.

    ``history[k]`` is the state k steps in the past; row i of the output only
    needs k-step-delayed data from i's k-hop in-neighbours.
    """
    taps = list(taps)
    history = list(history)
    if len(taps) != len(history):
        raise ValueError("need exactly one past state per filter tap")
    out = None
    power = np.eye(s.shape[0])
    for k, (h_k, x_k) in enumerate(zip(taps, history)):
        h_k = np.atleast_2d(np.asarray(h_k, dtype=np.float64))
        term = power @ np.asarray(x_k, dtype=np.float64) @ h_k
        out = term if out is None else out + term
        if k + 1 < len(taps):
            power = s @ power
    return out


def gcnn_forward(params: GcnnParams, x: np.ndarray) -> np.ndarray:
    """Layered forward pass; accepts leading batch dimensions on ``x``."""
    out = np.asarray(x, dtype=np.float64)
    last = len(params.layers) - 1
    for l, taps in enumerate(params.layers):
        acc = None
        cur = out
        for k, h_k in enumerate(taps):
            term = cur @ h_k
            acc = term if acc is None else acc + term
            if k + 1 < len(taps):
                cur = np.matmul(params.s, cur)
        out = acc if l == last else apply_nonlinearity(params.nonlinearity, acc)
    return out


def grnn_step(params: GrnnParams, prev: HiddenState, x: np.ndarray) -> tuple[HiddenState, np.ndarray]:
    """One controller update: new hidden state and the control it emits."""
    if params.mask is not None:
        check_mask(params.s, params.mask)
    x = np.asarray(x, dtype=np.float64)
    pre = np.matmul(params.s, prev.z) @ params.w + x @ params.f
    z = apply_nonlinearity(params.nonlinearity, pre)
    u = z @ params.g
    return HiddenState(z=z, t=prev.t + 1), u


class GrnnController:
    """Stateful closed-loop adapter for :func:`grnnctl.dynamics.rollout`."""

    def __init__(self, params: GrnnParams):
        self.params = params
        self.state: HiddenState | None = None

    def reset(self) -> None:
        self.state = None

    def __call__(self, t: int, x: np.ndarray) -> np.ndarray:
        if self.state is None:
            self.state = initial_hidden(x.shape[0], self.params.hidden_dim)
        self.state, u = grnn_step(self.params, self.state, x)
        return u


class GcnnController:
    """Memoryless adapter for :func:`grnnctl.dynamics.rollout`."""

    def __init__(self, params: GcnnParams):
        self.params = params

    def __call__(self, t: int, x: np.ndarray) -> np.ndarray:
        return gcnn_forward(self.params, x)


def _uniform_fan(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_grnn(
    n: int,
    hidden_dim: int,
    rng: np.random.Generator,
    mask_policy: str = "masked",
    topology: Topology | None = None,
    p: int = 1,
    q: int = 1,
    nonlinearity: str = "tanh",
) -> GrnnParams:
    """Initialize a GRNN controller under one of the shift-operator policies.

    ``masked``: S starts at the normalized adjacency and trains within the
    topology's support mask. ``fixed``: same start, S frozen. ``dense``:
    S starts as a dense random matrix rescaled to unit spectral norm and
    trains without support constraints. F, W, G are uniform in
    (-1/sqrt(fan_in), +1/sqrt(fan_in)); draw order F, W, G, then S.
    """
    f = _uniform_fan(rng, (p, hidden_dim), fan_in=p)
    w = _uniform_fan(rng, (hidden_dim, hidden_dim), fan_in=hidden_dim)
    g = _uniform_fan(rng, (hidden_dim, q), fan_in=hidden_dim)
    if mask_policy == "dense":
        s = rescale_spectral(rng.standard_normal((n, n)), 1.0)
        mask = None
        trainable = True
    elif mask_policy in ("masked", "fixed"):
        if topology is None:
            raise ValueError(f"mask policy {mask_policy!r} needs a topology")
        if topology.n != n:
            raise ValueError("topology size disagrees with n")
        s = normalized_adjacency(topology)
        mask = support_mask(topology)
        trainable = mask_policy == "masked"
    else:
        raise ValueError(f"unknown mask policy: {mask_policy!r}")
    return GrnnParams(s=s, f=f, w=w, g=g, mask=mask, s_trainable=trainable, nonlinearity=nonlinearity)


def init_gcnn(
    topology: Topology,
    rng: np.random.Generator,
    widths: tuple[int, ...] = (32,),
    taps: tuple[int, ...] = (5, 1),
    p: int = 1,
    q: int = 1,
    nonlinearity: str = "tanh",
) -> GcnnParams:
    """Initialize a GCNN on the topology's normalized adjacency.

    ``taps[l]`` counts the summands of layer l; tap matrices are uniform in
    (-1/sqrt(fan_in * taps), +1/sqrt(fan_in * taps)) following common graph
    filter practice. The defaults give the 192-parameter benchmark network.
    """
    if len(taps) != len(widths) + 1:
        raise ValueError("need len(taps) == len(widths) + 1")
    s = normalized_adjacency(topology)
    dims = (p, *widths, q)
    layers = []
    for l, k_l in enumerate(taps):
        if k_l < 1:
            raise ValueError("every layer needs at least one tap")
        r, c = dims[l], dims[l + 1]
        layers.append([_uniform_fan(rng, (r, c), fan_in=r * k_l) for _ in range(k_l)])
    return GcnnParams(s=s, layers=layers, nonlinearity=nonlinearity)


def init_params(arch: str, **kwargs):
    """Dispatch to :func:`init_grnn` or :func:`init_gcnn` by architecture tag."""
    if arch == "grnn":
        return init_grnn(**kwargs)
    if arch == "gcnn":
        return init_gcnn(**kwargs)
    raise ValueError(f"unknown architecture: {arch!r}")
