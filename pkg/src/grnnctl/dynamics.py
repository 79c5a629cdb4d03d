"""Networked LTI systems and closed-loop trajectory rollout.

System generation follows the benchmark recipe: A and B share the
eigenvectors of the normalized adjacency of the communication topology,
their eigenvalues are i.i.d. standard normal, entries beyond three hops are
zeroed, and each matrix is rescaled to a prescribed spectral norm (in that
order, so the norm targets are hit exactly).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Topology, hop_distance_matrix, normalized_adjacency
from .linalg import rescale_spectral, sym_eig

HOP_CUTOFF = 3


class DivergedError(RuntimeError):
    """A rollout produced a non-finite state."""

    def __init__(self, step: int):
        super().__init__(f"state became non-finite at step {step}")
        self.step = step


@dataclass(eq=False)
class LinearSystem:
    """Joint dynamics ``x(t+1) = a x(t) + b u(t)`` plus generation provenance."""

    a: np.ndarray
    b: np.ndarray
    source_topology: Topology
    norm_a: float
    norm_b: float
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(eq=False)
class Trajectory:
    """States ``(T+1, N, p)`` and the controls ``(T, N, q)`` that produced them."""

    states: np.ndarray
    controls: np.ndarray

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]


def generate_system(
    t: Topology,
    norm_a: float,
    norm_b: float,
    rng: np.random.Generator,
    seed: int | None = None,
) -> LinearSystem:
    """Draw a symmetric (A, B) pair aligned with the topology's spectrum.

    Construction order: eigenbasis build, hop-distance sparsification,
    spectral-norm rescale. Draw order is the A eigenvalues then the B
    eigenvalues, which pins the stream layout for reproducibility.
    """
    if norm_a <= 0 or norm_b <= 0:
        raise ValueError("norm targets must be positive")
    s_hat = normalized_adjacency(t)
    _, v = sym_eig(s_hat)
    lam_a = rng.standard_normal(t.n)
    lam_b = rng.standard_normal(t.n)
    a = (v * lam_a) @ v.T
    b = (v * lam_b) @ v.T
    far = hop_distance_matrix(t) > HOP_CUTOFF
    a[far] = 0.0
    b[far] = 0.0
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    a = rescale_spectral(a, norm_a)
    b = rescale_spectral(b, norm_b)
    return LinearSystem(a=a, b=b, source_topology=t, norm_a=float(norm_a), norm_b=float(norm_b), seed=seed)


def zero_policy(t: int, x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def linear_policy(k_gain: np.ndarray):
    """Stationary state feedback ``u = K x`` as a rollout policy."""
    k = np.asarray(k_gain, dtype=np.float64)

    def policy(t: int, x: np.ndarray) -> np.ndarray:
        return k @ x

    return policy


def rollout(sys: LinearSystem, controller, x0, horizon: int) -> Trajectory:
    """Closed-loop rollout of ``controller`` from ``x0`` for ``horizon`` steps.

    ``controller`` is a callable ``u = controller(t, x)`` with ``x`` of shape
    (N, p); stateful controllers may expose a ``reset()`` method, which is
    invoked before the loop. Controls are applied at t = 0 .. horizon-1 and
    the terminal state is recorded. Raises :class:`DivergedError` if a state
    stops being finite.
    """
    x = np.asarray(x0, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if n != sys.n:
        raise ValueError(f"x0 has {n} rows, system has {sys.n}")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")

    reset = getattr(controller, "reset", None)
    if reset is not None:
        reset()

    states = np.empty((horizon + 1, n, p))
    states[0] = x
    controls = None
    for t in range(horizon):
        u = np.asarray(controller(t, states[t]), dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        if controls is None:
            controls = np.empty((horizon, n, u.shape[1]))
        controls[t] = u
        nxt = sys.a @ states[t] + sys.b @ u
        if not np.all(np.isfinite(nxt)):
            raise DivergedError(t)
        states[t + 1] = nxt
    if controls is None:
        controls = np.empty((0, n, p))
    return Trajectory(states=states, controls=controls)
