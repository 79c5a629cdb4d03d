"""Closed-loop training of graph controllers.

The loss is the batch mean of the finite-horizon quadratic cost with the
controller in the loop. Gradients are exact reverse-mode backpropagation
through time, unrolled through both the controller recursion and the plant
recursion over the full horizon. Updates use ADAM with decoupled weight
decay and a cosine or stepwise learning-rate schedule; an optional l1
proximal step on S after each update supports topology co-design.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .controllers import (
    GcnnParams,
    GrnnParams,
    apply_nonlinearity,
    nonlinearity_grad_from_output,
)
from .dynamics import DivergedError
from .linalg import soft_threshold
from .lqr import LqrProblem, batch_costs, centralized_gain, evaluate_linear, normalized_cost

SCHEDULES = ("cosine", "step", "constant")


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite rollout; carries where and the loss trace."""

    def __init__(self, batch: int, loss_history):
        super().__init__(f"training diverged at batch {batch}")
        self.batch = batch
        self.loss_history = list(loss_history)


@dataclass
class TrainConfig:
    batch_size: int = 20
    total_batches: int = 750
    lr: float = 0.02
    schedule: str = "cosine"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    l1_weight: float = 0.0
    validation_every: int = 10
    validation_size: int = 100
    grad_clip: float | None = None
    seed: int = 0
    step_decay: float = 0.9
    step_every: int = 10

    def __post_init__(self):
        if self.batch_size < 1 or self.total_batches < 0:
            raise ValueError("need batch_size >= 1 and total_batches >= 0")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule: {self.schedule!r}")
        if self.lr < 0.0 or self.l1_weight < 0.0 or self.weight_decay < 0.0:
            raise ValueError("lr, l1_weight and weight_decay must be nonnegative")
        if self.validation_every < 1 or self.validation_size < 1:
            raise ValueError("validation cadence and size must be positive")

    @classmethod
    def for_grnn(cls, **overrides) -> "TrainConfig":
        base = dict(lr=0.02, schedule="cosine", weight_decay=1e-4)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_gcnn(cls, **overrides) -> "TrainConfig":
        # no weight decay on the filter taps
        base = dict(lr=0.01, schedule="step", weight_decay=0.0)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass(eq=False)
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_arrays(cls, arrays: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in arrays.items()},
            v={k: np.zeros_like(a) for k, a in arrays.items()},
        )


@dataclass(eq=False)
class LearningCurve:
    """Validation normalized cost sampled over the course of one run."""

    batches: np.ndarray
    costs: np.ndarray


@dataclass(eq=False)
class AggregateCurve:
    """Across-run quartiles of validation cost at shared batch indices."""

    batches: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray


def aggregate_curves(curves) -> AggregateCurve:
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to aggregate")
    batches = curves[0].batches
    for c in curves[1:]:
        if not np.array_equal(c.batches, batches):
            raise ValueError("curves sample different batch indices")
    stacked = np.stack([c.costs for c in curves])
    q1, med, q3 = np.percentile(stacked, [25.0, 50.0, 75.0], axis=0)
    return AggregateCurve(batches=batches.copy(), q1=q1, median=med, q3=q3)


def trainable_arrays(params) -> dict:
    """Live views of the arrays the optimizer may mutate, keyed by name."""
    if isinstance(params, GrnnParams):
        out = {"f": params.f, "w": params.w, "g": params.g}
        if params.s_trainable:
            out["s"] = params.s
        return out
    if isinstance(params, GcnnParams):
        return {
            f"h_{l}_{k}": h
            for l, taps in enumerate(params.layers)
            for k, h in enumerate(taps)
        }
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


def grnn_rollout_batch(params: GrnnParams, a, b, x0: np.ndarray, horizon: int):
    """Closed-loop unroll for a batch of initial states.

    ``x0``: (k, N). Returns states ``xs`` (T+1, k, N, 1), hidden states
    ``zs`` (T+1, k, N, h) with ``zs[t] = Z(t-1)``, controls ``us``
    (T, k, N, 1). Raises :class:`DivergedError` on non-finite states.
    """
    if params.p != 1 or params.q != 1:
        raise ValueError("closed-loop rollout needs scalar node features")
    kb, n = x0.shape
    xs = np.empty((horizon + 1, kb, n, 1))
    zs = np.empty((horizon + 1, kb, n, params.hidden_dim))
    us = np.empty((horizon, kb, n, 1))
    xs[0] = x0[..., None]
    zs[0] = 0.0
    for t in range(horizon):
        pre = np.matmul(params.s, zs[t]) @ params.w + xs[t] @ params.f
        zs[t + 1] = apply_nonlinearity(params.nonlinearity, pre)
        us[t] = zs[t + 1] @ params.g
        xs[t + 1] = np.matmul(a, xs[t]) + np.matmul(b, us[t])
        if not np.all(np.isfinite(xs[t + 1])):
            raise DivergedError(t)
    return xs, zs, us


def gcnn_rollout_batch(params: GcnnParams, a, b, x0: np.ndarray, horizon: int):
    """Closed-loop unroll of a memoryless layered controller.

    Returns (xs, us, cache); ``cache[t][l]`` holds the per-tap inputs
    ``S^k X_{l-1}`` and the layer's post-activation output, which the
    backward pass reuses.
    """
    if params.p != 1 or params.q != 1:
        raise ValueError("closed-loop rollout needs scalar node features")
    kb, n = x0.shape
    last = len(params.layers) - 1
    xs = np.empty((horizon + 1, kb, n, 1))
    us = np.empty((horizon, kb, n, 1))
    xs[0] = x0[..., None]
    cache = []
    for t in range(horizon):
        out = xs[t]
        step_cache = []
        for l, taps in enumerate(params.layers):
            powers = [out]
            for _ in range(len(taps) - 1):
                powers.append(np.matmul(params.s, powers[-1]))
            acc = powers[0] @ taps[0]
            for k in range(1, len(taps)):
                acc += powers[k] @ taps[k]
            out = acc if l == last else apply_nonlinearity(params.nonlinearity, acc)
            step_cache.append((powers, out))
        us[t] = out
        xs[t + 1] = np.matmul(a, xs[t]) + np.matmul(b, us[t])
        if not np.all(np.isfinite(xs[t + 1])):
            raise DivergedError(t)
        cache.append(step_cache)
    return xs, us, cache


def rollout_controller(params, prob: LqrProblem, x0: np.ndarray):
    """Batched closed-loop states and controls, squeezed to (T+1|T, k, N)."""
    if isinstance(params, GrnnParams):
        xs, _, us = grnn_rollout_batch(params, prob.sys.a, prob.sys.b, x0, prob.horizon)
    elif isinstance(params, GcnnParams):
        xs, us, _ = gcnn_rollout_batch(params, prob.sys.a, prob.sys.b, x0, prob.horizon)
    else:
        raise TypeError(f"unsupported parameter type: {type(params).__name__}")
    return xs[..., 0], us[..., 0]


def evaluate_controller(params, prob: LqrProblem, x0: np.ndarray) -> np.ndarray:
    """Per-initial-condition closed-loop costs, shape (k,)."""
    states, controls = rollout_controller(params, prob, x0)
    return batch_costs(states, controls, prob.q_mat, prob.r_mat, prob.p_mat)


def closed_loop_loss(params, prob: LqrProblem, x0_batch: np.ndarray) -> float:
    """Batch-mean quadratic cost with the controller in the loop."""
    return float(np.mean(evaluate_controller(params, prob, x0_batch)))


def _grnn_gradients(params: GrnnParams, prob: LqrProblem, x0: np.ndarray):
    a, b = prob.sys.a, prob.sys.b
    q_mat, r_mat, p_mat = prob.q_mat, prob.r_mat, prob.p_mat
    horizon = prob.horizon
    kb = x0.shape[0]
    xs, zs, us = grnn_rollout_batch(params, a, b, x0, horizon)
    loss = float(np.mean(batch_costs(xs[..., 0], us[..., 0], q_mat, r_mat, p_mat)))

    want_s = params.s_trainable
    grads = {"f": np.zeros_like(params.f), "w": np.zeros_like(params.w), "g": np.zeros_like(params.g)}
    if want_s:
        grads["s"] = np.zeros_like(params.s)
    dx_next = 2.0 * np.matmul(p_mat, xs[horizon])
    dz_carry = 0.0
    for t in range(horizon - 1, -1, -1):
        du = 2.0 * np.matmul(r_mat, us[t]) + np.matmul(b.T, dx_next)
        dz = du @ params.g.T + dz_carry
        grads["g"] += np.einsum("kna,knb->ab", zs[t + 1], du)
        dpre = dz * nonlinearity_grad_from_output(params.nonlinearity, zs[t + 1])
        if want_s:
            grads["s"] += np.einsum("kng,kmg->nm", dpre, zs[t] @ params.w)
        grads["w"] += np.einsum("kna,knb->ab", np.matmul(params.s, zs[t]), dpre)
        grads["f"] += np.einsum("knp,knh->ph", xs[t], dpre)
        dz_carry = np.matmul(params.s.T, dpre) @ params.w.T
        dx_next = 2.0 * np.matmul(q_mat, xs[t]) + np.matmul(a.T, dx_next) + dpre @ params.f.T
    for g in grads.values():
        g /= kb
    if want_s and params.mask is not None:
        grads["s"] *= params.mask
    return loss, grads


def _gcnn_gradients(params: GcnnParams, prob: LqrProblem, x0: np.ndarray):
    a, b = prob.sys.a, prob.sys.b
    q_mat, r_mat, p_mat = prob.q_mat, prob.r_mat, prob.p_mat
    horizon = prob.horizon
    kb = x0.shape[0]
    xs, us, cache = gcnn_rollout_batch(params, a, b, x0, horizon)
    loss = float(np.mean(batch_costs(xs[..., 0], us[..., 0], q_mat, r_mat, p_mat)))

    grads = {
        f"h_{l}_{k}": np.zeros_like(h)
        for l, taps in enumerate(params.layers)
        for k, h in enumerate(taps)
    }
    last = len(params.layers) - 1
    dx_next = 2.0 * np.matmul(p_mat, xs[horizon])
    for t in range(horizon - 1, -1, -1):
        dcur = 2.0 * np.matmul(r_mat, us[t]) + np.matmul(b.T, dx_next)
        for l in range(last, -1, -1):
            powers, out = cache[t][l]
            dacc = dcur if l == last else dcur * nonlinearity_grad_from_output(params.nonlinearity, out)
            taps = params.layers[l]
            dprev = np.zeros_like(powers[0])
            for k in range(len(taps) - 1, -1, -1):
                grads[f"h_{l}_{k}"] += np.einsum("kna,knb->ab", powers[k], dacc)
                dprev = np.matmul(params.s.T, dprev) + dacc @ taps[k].T
            dcur = dprev
        dx_next = 2.0 * np.matmul(q_mat, xs[t]) + np.matmul(a.T, dx_next) + dcur
    for g in grads.values():
        g /= kb
    return loss, grads


def loss_gradients(params, prob: LqrProblem, x0_batch: np.ndarray):
    """Loss plus exact reverse-mode gradients for every trainable array."""
    if isinstance(params, GrnnParams):
        return _grnn_gradients(params, prob, x0_batch)
    if isinstance(params, GcnnParams):
        return _gcnn_gradients(params, prob, x0_batch)
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


def lr_at(batch: int, config: TrainConfig) -> float:
    if config.schedule == "cosine":
        return config.lr * 0.5 * (1.0 + np.cos(np.pi * batch / config.total_batches))
    if config.schedule == "step":
        return config.lr * config.step_decay ** (batch // config.step_every)
    return config.lr


def adam_step(state: AdamState, arrays: dict, grads: dict, lr: float, config: TrainConfig) -> dict:
    """In-place clipped/decayed ADAM update; returns the updated arrays."""
    if config.grad_clip is not None:
        total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if total > config.grad_clip:
            scale = config.grad_clip / total
            grads = {k: g * scale for k, g in grads.items()}
    state.step += 1
    bc1 = 1.0 - config.beta1 ** state.step
    bc2 = 1.0 - config.beta2 ** state.step
    for key in sorted(arrays):
        g = grads[key]
        if config.weight_decay > 0.0:
            arrays[key] *= 1.0 - lr * config.weight_decay
        m = state.m[key]
        v = state.v[key]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        arrays[key] -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps)
    return arrays


@dataclass(eq=False)
class ValidationPack:
    """Fixed initial conditions with their centralized-optimal costs."""

    x0: np.ndarray
    lqr_costs: np.ndarray

    @property
    def size(self) -> int:
        return self.x0.shape[0]


def make_validation(prob: LqrProblem, size: int, rng: np.random.Generator) -> ValidationPack:
    x0 = rng.standard_normal((size, prob.n))
    gain = centralized_gain(prob.sys.a, prob.sys.b, prob.p_mat, prob.r_mat)
    return ValidationPack(x0=x0, lqr_costs=evaluate_linear(prob.sys, prob, gain, x0))


def validate(params, prob: LqrProblem, pack: ValidationPack) -> float:
    """Normalized cost on the pack: mean controller cost over mean LQR cost."""
    return normalized_cost(evaluate_controller(params, prob, pack.x0), pack.lqr_costs)


def train(params, prob: LqrProblem, config: TrainConfig, rng: np.random.Generator, validation: ValidationPack | None = None):
    """Stochastic closed-loop training of ``params`` on one problem instance.

    Each batch draws fresh standard-normal initial conditions. The validation
    pack (drawn from ``rng`` if not supplied) is scored before the first
    batch and every ``validation_every`` batches thereafter. Mutates
    ``params`` in place and returns ``(params, LearningCurve)``.
    """
    arrays = trainable_arrays(params)
    state = AdamState.for_arrays(arrays)
    if validation is None:
        validation = make_validation(prob, config.validation_size, rng)
    losses: list[float] = []

    def scored() -> float:
        # validation rollouts can blow up too, e.g. when the starting
        # parameters are already unstable; report that the same way as a
        # divergence inside the optimization loop
        try:
            return validate(params, prob, validation)
        except DivergedError as err:
            raise TrainingDiverged(len(losses), losses) from err

    batches = [0]
    costs = [scored()]
    for bidx in range(config.total_batches):
        x0 = rng.standard_normal((config.batch_size, prob.n))
        try:
            loss, grads = loss_gradients(params, prob, x0)
        except DivergedError as err:
            raise TrainingDiverged(bidx, losses) from err
        if not np.isfinite(loss):
            raise TrainingDiverged(bidx, losses)
        losses.append(loss)
        lr = lr_at(bidx, config)
        adam_step(state, arrays, grads, lr, config)
        if config.l1_weight > 0.0 and "s" in arrays:
            # Proximal step for the l1 penalty on S, taken in the same
            # diagonal metric ADAM just used: the per-entry threshold is the
            # scheduled rate over the root second moment, so shrinkage and
            # gradient steps stay on a common scale and sub-threshold entries
            # land on exact zeros.
            v_hat = np.sqrt(state.v["s"] / (1.0 - config.beta2 ** state.step))
            tau = lr * config.l1_weight / (v_hat + config.adam_eps)
            arrays["s"][...] = soft_threshold(arrays["s"], tau)
        done = bidx + 1
        if done % config.validation_every == 0 or done == config.total_batches:
            batches.append(done)
            costs.append(scored())
    curve = LearningCurve(batches=np.asarray(batches), costs=np.asarray(costs))
    return params, curve
