import numpy as np
import pytest
from hypothesis import given, strategies as st

import helpers
from grnnctl.codesign import (
    DEFAULT_SUPPORT_EPS,
    codesign,
    default_lambda_grid,
    prox_l1,
    sweep_lambda,
    threshold_support,
)
from grnnctl.graphs import support_mask
from grnnctl.seeding import stream
from grnnctl.training import TrainConfig, make_validation


def quick_config(**overrides):
    base = dict(
        batch_size=4, total_batches=20, lr=0.02, validation_every=10,
        validation_size=8, seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_prox_examples():
    assert prox_l1(np.array(2.0), 0.5) == pytest.approx(1.5)
    assert prox_l1(np.array(-0.3), 0.5) == 0.0


def test_prox_zero_tau_is_identity():
    s = np.array([[0.2, -1.7], [0.0, 3.4]])
    assert np.array_equal(prox_l1(s, 0.0), s)


def test_prox_rejects_negative_tau():
    with pytest.raises(ValueError):
        prox_l1(np.zeros(2), -0.1)


@given(
    st.floats(-3.0, 3.0, allow_nan=False),
    st.floats(0.0, 2.0, allow_nan=False),
)
def test_prox_minimizes_scalar_objective(s, tau):
    """Soft-thresholding is the exact minimizer of 0.5 (x-s)^2 + tau |x|,
    so no grid point can do better than the closed form."""
    x = float(prox_l1(np.array(s), tau))

    def objective(v):
        return 0.5 * (v - s) ** 2 + tau * abs(v)

    grid = np.linspace(-4.0, 4.0, 4001)
    assert objective(x) <= np.min(0.5 * (grid - s) ** 2 + tau * np.abs(grid)) + 1e-12


def test_threshold_boundary_at_default_eps():
    s = np.array([[0.5, 0.0039], [0.0041, 0.5]])
    topo = threshold_support(s, eps=0.004)
    assert (1, 0) not in topo.edge_list()  # |0.0039| falls short
    assert (0, 1) in topo.edge_list()      # |0.0041| survives
    assert topo.self_loops() == [0, 1]


def test_threshold_zero_matrix_has_no_edges():
    topo = threshold_support(np.zeros((4, 4)))
    assert topo.num_directed_edges == 0
    assert topo.self_loops() == []


def test_threshold_uses_magnitudes():
    s = np.array([[0.0, -0.5], [0.5, 0.0]])
    topo = threshold_support(s, eps=0.1)
    assert topo.edge_list() == [(0, 1), (1, 0)]


def test_threshold_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        threshold_support(np.zeros((2, 2)), eps=0.0)


def test_default_eps_value():
    assert DEFAULT_SUPPORT_EPS == 0.004


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.5))
def test_support_stable_below_smallest_survivor(seed, tau):
    """After soft-thresholding, dropped entries are exact zeros; any
    threshold at or below the smallest surviving magnitude reads off the
    same support."""
    rng = np.random.default_rng(seed)
    s = prox_l1(rng.standard_normal((6, 6)), tau)
    mags = np.abs(s[s != 0.0])
    if mags.size == 0:
        return
    smallest = mags.min()
    reference = s != 0.0
    for eps in (smallest, smallest / 2.0, smallest / 1000.0):
        assert np.array_equal(threshold_support(s, eps).adjacency, reference)


def test_default_lambda_grid_spans_four_decades():
    grid = default_lambda_grid()
    assert len(grid) == 13
    assert grid[0] == pytest.approx(1e-2)
    assert grid[-1] == pytest.approx(1e2)
    assert np.all(np.diff(grid) > 0)
    ratios = grid[1:] / grid[:-1]
    assert np.allclose(ratios, ratios[0])


def test_codesign_result_consistency(tiny_prob):
    rng = stream(40, 1)
    validation = make_validation(tiny_prob, 8, stream(40, 2))
    eval_pack = make_validation(tiny_prob, 8, stream(40, 3))
    result = codesign(
        tiny_prob, lam=0.5, config=quick_config(), rng=rng,
        validation=validation, eval_pack=eval_pack, hidden_dim=3,
    )
    refined = result.refined_params
    off = ~np.eye(tiny_prob.n, dtype=bool)
    assert result.edge_count == int(np.count_nonzero(refined.s * off))
    assert np.array_equal(refined.mask, support_mask(result.identified_topology))
    assert np.all(refined.s[~refined.mask] == 0.0)
    assert np.all(result.step1_params.s[~refined.mask] == 0.0)
    assert result.lam == 0.5
    assert result.cost_step1 > 0.0 and result.cost_refined > 0.0
    q1, med, q3 = result.cost_quartiles
    assert q1 <= med <= q3
    assert isinstance(result.refinement_regressed, bool)
    assert result.step1_curve.batches[0] == 0
    assert result.refined_curve.batches[-1] == 20


def test_codesign_zero_penalty_keeps_dense_support(tiny_prob):
    result = codesign(
        tiny_prob, lam=0.0, config=quick_config(), rng=stream(41, 1),
        validation=make_validation(tiny_prob, 8, stream(41, 2)),
        eval_pack=make_validation(tiny_prob, 8, stream(41, 3)),
        hidden_dim=3,
    )
    n = tiny_prob.n
    # no shrinkage: every off-diagonal entry stays away from exact zero
    assert result.edge_count == n * n - n


def test_codesign_rejects_negative_penalty(tiny_prob):
    with pytest.raises(ValueError):
        codesign(tiny_prob, lam=-1.0, config=quick_config(), rng=stream(42, 1))


def test_codesign_large_penalty_empties_support(tiny_prob):
    result = codesign(
        tiny_prob, lam=1e3, config=quick_config(total_batches=40),
        rng=stream(43, 1),
        validation=make_validation(tiny_prob, 8, stream(43, 2)),
        eval_pack=make_validation(tiny_prob, 8, stream(43, 3)),
        hidden_dim=3,
    )
    assert result.edge_count <= 4


def test_sweep_aggregates_over_instances():
    probs = [helpers.tiny_problem(seed=s, n=5, k=2, horizon=8) for s in (50, 51)]
    curve = sweep_lambda(
        probs, [10.0, 0.1], quick_config(), base_seed=7, hidden_dim=3)
    assert list(curve.lambdas) == [0.1, 10.0]
    assert len(curve.cells) == 4
    assert curve.edges_median.shape == (2,)
    assert curve.cost_median.shape == (2,)
    assert not curve.failures
    assert np.all(curve.edges_q1 <= curve.edges_median)
    assert np.all(curve.edges_median <= curve.edges_q3)


def test_sweep_duplicate_lambda_cells_identical():
    probs = [helpers.tiny_problem(seed=52, n=5, k=2, horizon=8)]
    curve = sweep_lambda(
        probs, [1.0, 1.0], quick_config(), base_seed=9, hidden_dim=3)
    a, b = curve.cells
    assert a.result.edge_count == b.result.edge_count
    assert a.result.cost_refined == b.result.cost_refined
    assert np.array_equal(a.result.refined_params.s, b.result.refined_params.s)


def test_sweep_requires_grid_and_instances():
    probs = [helpers.tiny_problem(seed=53, n=5, k=2, horizon=8)]
    with pytest.raises(ValueError):
        sweep_lambda([], [0.1, 1.0], quick_config())
    with pytest.raises(ValueError):
        sweep_lambda(probs, [0.1], quick_config())
