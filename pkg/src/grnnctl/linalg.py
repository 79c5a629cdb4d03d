"""Dense symmetric linear algebra helpers.

All matrices are plain float64 ndarrays, small enough (N <= ~100) that
robustness and clear failure modes matter more than speed. Symmetric
eigendecompositions and SPD solves are delegated to LAPACK; the spectral
norm is an independent power iteration so the two routes can cross-check
each other in tests.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

SYM_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class NotSpdError(np.linalg.LinAlgError):
    """A matrix expected to be symmetric positive definite was not."""


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    return a


def check_symmetric(m: np.ndarray, tol: float = SYM_TOL) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix is not square: shape {m.shape}")
    if m.size and float(np.max(np.abs(m - m.T))) > tol:
        raise ValueError("matrix is not symmetric within tolerance")


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``v``, so ``m = v @ diag(w) @ v.T``.
    Raises ``ValueError`` if ``m`` deviates from symmetry by more than 1e-10.
    """
    a = _as_matrix(m)
    check_symmetric(a)
    w, v = np.linalg.eigh(a)
    return w, v


def spectral_norm(m, rtol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value, via power iteration on ``m.T @ m``.

    The start vector comes from a fixed internal seed, so the result is
    deterministic. Raises ``ConvergenceError`` if the Rayleigh quotient has
    not settled to relative tolerance ``rtol`` within ``max_iter`` sweeps.
    """
    a = _as_matrix(m)
    if a.size == 0 or not np.any(a):
        return 0.0
    mtm = a.T @ a
    v = np.random.default_rng(0x5EED).standard_normal(mtm.shape[0])
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = mtm @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        sigma2_new = float(v @ mtm @ v)
        if abs(sigma2_new - sigma2) <= rtol * sigma2_new:
            return float(np.sqrt(sigma2_new))
        sigma2 = sigma2_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} sweeps")


def rescale_spectral(m, target: float) -> np.ndarray:
    """Rescale ``m`` so its spectral norm equals ``target``.

    Two measure-and-scale passes, so the result sits at the fixed point of
    the estimator (within ~1e-10 of the target in practice).
    """
    a = _as_matrix(m)
    if target < 0:
        raise ValueError("target norm must be non-negative")
    if target == 0.0:
        return np.zeros_like(a)
    for _ in range(2):
        s = spectral_norm(a)
        if s == 0.0:
            raise ValueError("cannot rescale a zero matrix to a nonzero norm")
        a = a * (target / s)
    return a


def solve_spd(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` for symmetric positive definite ``m`` by Cholesky.

    Raises ``NotSpdError`` when the factorization hits a non-positive pivot.
    """
    a = _as_matrix(m)
    check_symmetric(a)
    b = np.asarray(rhs, dtype=np.float64)
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(str(exc)) from None
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def soft_threshold(x, tau: float) -> np.ndarray:
    """Entrywise ``sign(x) * max(|x| - tau, 0)``."""
    a = np.asarray(x, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)
