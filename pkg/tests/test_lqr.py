import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import helpers
from grnnctl.dynamics import LinearSystem, Trajectory, linear_policy, rollout
from grnnctl.lqr import (
    batch_costs,
    centralized_gain,
    dare_residual,
    evaluate_linear,
    linear_rollout_batch,
    make_problem,
    normalized_cost,
    solve_dare,
    trajectory_cost,
)
from grnnctl.seeding import stream

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def gain_of(prob):
    return centralized_gain(prob.sys.a, prob.sys.b, prob.p_mat, prob.r_mat)


def scalar_system():
    return LinearSystem(
        a=np.eye(1), b=np.eye(1), source_topology=None,
        norm_a=1.0, norm_b=1.0, seed=None,
    )


def test_scalar_dare_closed_form():
    """a = b = q = r = 1 reduces the fixed point to p^2 - p - 1 = 0, whose
    positive root is the golden ratio."""
    p = solve_dare(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    assert abs(p[0, 0] - GOLDEN) <= 1e-9


def test_scalar_gain_closed_form():
    prob = make_problem(scalar_system(), horizon=5)
    k = gain_of(prob)
    assert k[0, 0] == pytest.approx(-GOLDEN / (GOLDEN + 1.0), abs=1e-9)
    assert k[0, 0] == pytest.approx(-0.6180339887, abs=1e-8)


def test_dare_residual_small_on_sampled_instance():
    prob = helpers.tiny_problem(seed=21, n=10, k=3, norm_a=0.995, horizon=50)
    assert dare_residual(prob.sys.a, prob.sys.b, prob.q_mat, prob.r_mat, prob.p_mat) <= 1e-8
    w = np.linalg.eigvalsh(prob.p_mat)
    assert w.min() >= -1e-10
    assert np.allclose(prob.p_mat, prob.p_mat.T, atol=1e-12)


def test_trajectory_cost_zero():
    traj = Trajectory(states=np.zeros((3, 4, 1)), controls=np.zeros((2, 4, 1)))
    prob = helpers.tiny_problem(seed=1, n=4, k=1, horizon=2)
    assert trajectory_cost(traj, prob) == 0.0


def test_trajectory_cost_hand_arithmetic():
    # T=1, Q=R=P=I, x0 = e1, u(0)=0, A=2I: stage 1 + terminal 4
    sys = LinearSystem(
        a=2.0 * np.eye(3), b=np.eye(3), source_topology=None,
        norm_a=2.0, norm_b=1.0, seed=None,
    )
    prob = make_problem(scalar_system(), horizon=1)
    prob = type(prob)(
        sys=sys, q_mat=np.eye(3), r_mat=np.eye(3), p_mat=np.eye(3), horizon=1,
    )
    traj = rollout(sys, lambda t, x: np.zeros_like(x), np.array([1.0, 0.0, 0.0]), 1)
    assert trajectory_cost(traj, prob) == pytest.approx(5.0)


def test_trajectory_cost_permutation_invariant():
    prob = helpers.tiny_problem(seed=2, n=6, k=2, horizon=8)
    x0 = stream(2, 9).standard_normal(6)
    traj = rollout(prob.sys, linear_policy(gain_of(prob)), x0, 8)
    perm = stream(2, 10).permutation(6)
    permuted = Trajectory(states=traj.states[:, perm], controls=traj.controls[:, perm])
    # Q = R = I and P gets conjugated along with the trajectory
    pprob = type(prob)(
        sys=prob.sys, q_mat=prob.q_mat, r_mat=prob.r_mat,
        p_mat=prob.p_mat[np.ix_(perm, perm)], horizon=8,
    )
    assert trajectory_cost(permuted, pprob) == pytest.approx(
        trajectory_cost(traj, prob), rel=1e-12)


def test_batch_costs_matches_per_trajectory_sum():
    prob = helpers.tiny_problem(seed=4, n=5, k=2, horizon=7)
    k_gain = gain_of(prob)
    x0 = stream(4, 11).standard_normal((6, 5))
    states, controls = linear_rollout_batch(prob.sys, k_gain, x0, prob.horizon)
    batched = batch_costs(states, controls, prob.q_mat, prob.r_mat, prob.p_mat)
    for i in range(6):
        traj = rollout(prob.sys, linear_policy(k_gain), x0[i], 7)
        assert batched[i] == pytest.approx(trajectory_cost(traj, prob), rel=1e-12)


def test_lqr_cost_equals_quadratic_value_function():
    """With terminal weight solving the fixed point, the optimal cost from
    x0 is exactly x0' P x0."""
    prob = helpers.tiny_problem(seed=6, n=8, k=2, norm_a=0.995, horizon=50)
    k_gain = gain_of(prob)
    for trial in range(5):
        x0 = stream(6, 20 + trial).standard_normal(8)
        traj = rollout(prob.sys, linear_policy(k_gain), x0, 50)
        assert trajectory_cost(traj, prob) == pytest.approx(
            float(x0 @ prob.p_mat @ x0), rel=1e-8)


def test_lqr_normalizes_to_exactly_one():
    prob = helpers.tiny_problem(seed=7, n=6, k=2, horizon=30)
    x0 = stream(7, 12).standard_normal((40, 6))
    costs = evaluate_linear(prob.sys, prob, gain_of(prob), x0)
    assert normalized_cost(costs, costs) == 1.0


def test_normalized_cost_ratio_of_means():
    lqr = np.array([1.0, 3.0])
    assert normalized_cost(2.0 * lqr, lqr) == pytest.approx(2.0)
    # ratio of means, not mean of ratios
    assert normalized_cost(np.array([2.0, 2.0]), lqr) == pytest.approx(1.0)


def test_normalized_cost_rejects_empty_and_mismatched():
    with pytest.raises(ValueError):
        normalized_cost(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        normalized_cost(np.ones(3), np.ones(2))


@given(st.integers(0, 500))
def test_suboptimal_gain_never_beats_lqr_value(seed):
    """Any linear gain's cost is bounded below by the quadratic value
    function, pointwise in x0."""
    prob = helpers.tiny_problem(seed=9, n=5, k=2, horizon=40)
    rng = np.random.default_rng(seed)
    gain = gain_of(prob) + 0.1 * rng.standard_normal((5, 5))
    x0 = rng.standard_normal(5)
    traj = rollout(prob.sys, linear_policy(gain), x0, 40)
    assert trajectory_cost(traj, prob) >= float(x0 @ prob.p_mat @ x0) - 1e-9
