"""Shared test utilities: small problem builders and a finite-difference
gradient oracle."""
import numpy as np

from grnnctl.dynamics import generate_system
from grnnctl.graphs import Topology, sample_topology
from grnnctl.lqr import make_problem
from grnnctl.seeding import stream
from grnnctl.training import closed_loop_loss, trainable_arrays


def tiny_problem(seed=0, n=5, k=2, norm_a=0.9, norm_b=1.0, horizon=10):
    """A small instance for fast closed-loop tests."""
    topo = sample_topology(n, k, stream(seed, 101))
    sys = generate_system(topo, norm_a, norm_b, stream(seed, 102), seed=seed)
    return make_problem(sys, horizon=horizon)


def complete_topology(n):
    adj = np.ones((n, n), dtype=bool)
    np.fill_diagonal(adj, False)
    return Topology(adjacency=adj)


def fd_gradients(params, prob, x0, step=1e-5):
    """Central finite differences of the closed-loop loss.

    Masked-out entries of S are pinned to zero by construction and carry no
    descent direction, so they are skipped rather than perturbed.
    """
    grads = {}
    mask = getattr(params, "mask", None)
    for name, arr in trainable_arrays(params).items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            if name == "s" and mask is not None and not mask[idx]:
                continue
            orig = arr[idx]
            arr[idx] = orig + step
            hi = closed_loop_loss(params, prob, x0)
            arr[idx] = orig - step
            lo = closed_loop_loss(params, prob, x0)
            arr[idx] = orig
            g[idx] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def max_rel_err(analytic, numeric, floor=1e-6):
    """Worst entrywise relative disagreement between two gradient dicts.

    The denominator is floored: finite differences carry absolute noise
    around 1e-8 for these loss scales, so comparing near-zero entries at
    full relative precision would only measure that noise.
    """
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst
