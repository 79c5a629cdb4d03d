"""Finite-horizon LQR costs, the Riccati fixed point, and the centralized gain.

The terminal weight P is the discrete algebraic Riccati solution, which makes
the stationary gain ``K = -(B'PB + R)^{-1} B'PA`` exactly optimal for the
finite-horizon problem and the optimal cost equal to ``x0' P x0`` -- a handy
oracle that several tests lean on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import LinearSystem, Trajectory
from .linalg import ConvergenceError, check_symmetric, solve_spd


@dataclass(eq=False)
class LqrProblem:
    sys: LinearSystem
    q_mat: np.ndarray
    r_mat: np.ndarray
    p_mat: np.ndarray
    horizon: int

    @property
    def n(self) -> int:
        return self.sys.n


def solve_dare(a, b, q, r, rtol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Fixed-point iteration of the Riccati recursion from P0 = Q.

    Stops when the relative Frobenius change drops below ``rtol``; raises
    :class:`ConvergenceError` at the iteration cap, which in practice flags
    an unstabilizable or ill-conditioned pair.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    p = q.copy()
    for _ in range(max_iter):
        bpa = b.T @ p @ a
        p_new = q + a.T @ p @ a - bpa.T @ solve_spd(b.T @ p @ b + r, bpa)
        p_new = 0.5 * (p_new + p_new.T)
        delta = float(np.linalg.norm(p_new - p))
        if delta <= rtol * max(float(np.linalg.norm(p_new)), 1e-300):
            return p_new
        p = p_new
    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} steps")


def dare_residual(a, b, q, r, p) -> float:
    """Frobenius norm of ``A'PA - P - A'PB (B'PB+R)^{-1} B'PA + Q``."""
    bpa = b.T @ p @ a
    res = a.T @ p @ a - p - bpa.T @ solve_spd(b.T @ p @ b + r, bpa) + q
    return float(np.linalg.norm(res))


def centralized_gain(a, b, p, r) -> np.ndarray:
    """Optimal stationary feedback ``K = -(B'PB + R)^{-1} B'PA``."""
    b = np.asarray(b, dtype=np.float64)
    return -solve_spd(b.T @ p @ b + r, b.T @ p @ np.asarray(a, dtype=np.float64))


def make_problem(sys: LinearSystem, horizon: int = 50) -> LqrProblem:
    """Benchmark cost: Q = R = I, terminal P from the Riccati equation."""
    eye = np.eye(sys.n)
    p = solve_dare(sys.a, sys.b, eye, eye)
    return LqrProblem(sys=sys, q_mat=eye, r_mat=eye, p_mat=p, horizon=horizon)


def trajectory_cost(traj: Trajectory, prob: LqrProblem) -> float:
    """Quadratic cost: state and control stage terms plus the terminal term."""
    if traj.horizon != prob.horizon:
        raise ValueError(f"trajectory horizon {traj.horizon} != problem horizon {prob.horizon}")
    states = traj.states
    controls = traj.controls
    if states.shape[2] != 1 or (controls.size and controls.shape[2] != 1):
        raise ValueError("cost is defined for scalar node features (p = q = 1)")
    x = states[:, :, 0]
    u = controls[:, :, 0] if controls.size else controls.reshape(0, states.shape[1])
    total = float(np.einsum("tn,nm,tm->", x[:-1], prob.q_mat, x[:-1]))
    if u.shape[0]:
        total += float(np.einsum("tn,nm,tm->", u, prob.r_mat, u))
    total += float(x[-1] @ prob.p_mat @ x[-1])
    return total


def batch_costs(states: np.ndarray, controls: np.ndarray, q: np.ndarray, r: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized per-trajectory costs.

    ``states``: (T+1, k, N), ``controls``: (T, k, N); returns shape (k,).
    """
    run = np.einsum("tkn,nm,tkm->k", states[:-1], q, states[:-1])
    if controls.shape[0]:
        run = run + np.einsum("tkn,nm,tkm->k", controls, r, controls)
    return run + np.einsum("kn,nm,km->k", states[-1], p, states[-1])


def linear_rollout_batch(sys: LinearSystem, k_gain: np.ndarray | None, x0: np.ndarray, horizon: int):
    """Batched rollout under ``u = K x`` (or u = 0 when ``k_gain`` is None).

    ``x0``: (k, N). Returns (states (T+1, k, N), controls (T, k, N)).
    """
    kb, n = x0.shape
    states = np.empty((horizon + 1, kb, n))
    controls = np.zeros((horizon, kb, n))
    states[0] = x0
    for t in range(horizon):
        if k_gain is not None:
            controls[t] = states[t] @ k_gain.T
            states[t + 1] = states[t] @ sys.a.T + controls[t] @ sys.b.T
        else:
            states[t + 1] = states[t] @ sys.a.T
    return states, controls


def evaluate_linear(sys: LinearSystem, prob: LqrProblem, k_gain: np.ndarray | None, x0: np.ndarray) -> np.ndarray:
    """Per-initial-condition costs of a linear (or zero) policy."""
    states, controls = linear_rollout_batch(sys, k_gain, x0, prob.horizon)
    return batch_costs(states, controls, prob.q_mat, prob.r_mat, prob.p_mat)


def normalized_cost(controller_costs, lqr_costs) -> float:
    """Ratio of mean controller cost to mean centralized-LQR cost (paired sets)."""
    c = np.asarray(controller_costs, dtype=np.float64)
    l = np.asarray(lqr_costs, dtype=np.float64)
    if c.size == 0 or c.shape != l.shape:
        raise ValueError("cost lists must be non-empty and paired")
    return float(np.mean(c) / np.mean(l))
