import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridbandit import (
    Action,
    GridSpec,
    bellman_residual,
    enumerate_pairs,
    greedy_policy,
    transition_model,
    value_iteration,
)
from gridbandit.planner import _backup
from gridbandit.gridworld import N_ACTIONS, flat_model

A_INDEX = 1  # flat index of cell A=(0,1) on the default grid
B_INDEX = 3


def expected_immediate_reward(spec):
    table = np.zeros((spec.n_states, N_ACTIONS))
    for s, a in enumerate_pairs(spec):
        table[spec.state_index(s), a] = sum(
            t.prob * t.reward for t in transition_model(spec, s, a))
    return table


def policy_evaluation_oracle(spec, policy, gamma):
    """Exact Q-table of a deterministic policy via the linear system it satisfies."""
    n = spec.n_states
    p_pi = np.zeros((n, n))
    r_pi = np.zeros(n)
    for si in range(n):
        for t in transition_model(spec, spec.state_at(si), Action(int(policy[si]))):
            p_pi[si, spec.state_index(t.next)] += t.prob
            r_pi[si] += t.prob * t.reward
    v = np.linalg.solve(np.eye(n) - gamma * p_pi, r_pi)
    q = np.zeros((n, N_ACTIONS))
    for s, a in enumerate_pairs(spec):
        si = spec.state_index(s)
        q[si, a] = sum(t.prob * (t.reward + gamma * v[spec.state_index(t.next)])
                       for t in transition_model(spec, s, a))
    return q


def test_residual_within_tolerance(spec):
    opt = value_iteration(spec, 0.9, tol=1e-10)
    assert opt.residual <= 1e-10
    assert bellman_residual(spec, opt.values, 0.9) <= 1e-10


def test_gamma_zero_is_expected_immediate_reward(spec):
    opt = value_iteration(spec, 0.0)
    expected = expected_immediate_reward(spec)
    assert np.array_equal(opt.values, expected)
    assert opt.values[A_INDEX, 0] == 5.0
    assert opt.values[B_INDEX, 0] == 2.5
    assert opt.values[0, Action.UP] == -1.0
    assert opt.values[0, Action.DOWN] == 0.0


def test_gamma_09_matches_linear_system_oracle(spec):
    opt = value_iteration(spec, 0.9, tol=1e-12)
    policy = greedy_policy(opt.values)
    oracle = policy_evaluation_oracle(spec, policy, 0.9)
    # the evaluated policy must attain the max of its own Q (optimal actions
    # can tie, so argmax indices need not coincide)
    attained = oracle[np.arange(spec.n_states), policy]
    assert np.max(oracle.max(axis=1) - attained) <= 1e-9
    assert np.max(np.abs(oracle - opt.values)) <= 1e-8


def test_max_value_sits_at_cell_a(spec):
    opt = value_iteration(spec, 0.9)
    per_state = opt.values.max(axis=1)
    assert per_state.argmax() == A_INDEX


def test_sweeps_contract_geometrically(spec):
    gamma = 0.9
    model = flat_model(spec)
    q = np.zeros(spec.n_pairs)
    prev = bellman_residual(spec, q, gamma)
    for _ in range(60):
        q = _backup(model, q, gamma)
        cur = bellman_residual(spec, q, gamma)
        assert cur <= gamma * prev + 1e-12
        prev = cur


def test_convergence_independent_of_init(spec):
    gamma, tol = 0.9, 1e-10
    opt = value_iteration(spec, gamma, tol=tol)
    model = flat_model(spec)
    rng = np.random.default_rng(7)
    q = rng.uniform(-30, 30, spec.n_pairs)
    while bellman_residual(spec, q, gamma) > tol:
        q = _backup(model, q, gamma)
    assert np.max(np.abs(q - opt.values.ravel())) <= 10 * tol


def test_value_iteration_rejects_bad_arguments(spec):
    with pytest.raises(ValueError):
        value_iteration(spec, 1.0)
    with pytest.raises(ValueError):
        value_iteration(spec, -0.1)
    with pytest.raises(ValueError):
        value_iteration(spec, 0.9, tol=0.0)


def test_bellman_residual_zero_table_gamma_zero(spec):
    assert bellman_residual(spec, np.zeros((25, 4)), 0.0) == 5.0


def test_bellman_residual_is_pure(spec):
    q = np.linspace(-3, 7, 100).reshape(25, 4)
    assert bellman_residual(spec, q, 0.9) == bellman_residual(spec, q, 0.9)


def test_bellman_residual_shape_check(spec):
    with pytest.raises(ValueError):
        bellman_residual(spec, np.zeros(96), 0.9)


def test_greedy_policy_unique_maxima():
    q = np.array([[0.0, 1.0, -1.0, 0.5], [3.0, 2.0, 1.0, 0.0]])
    assert greedy_policy(q).tolist() == [Action.DOWN, Action.UP]


def test_greedy_policy_tie_break_canonical():
    q = np.zeros((25, 4))
    assert (greedy_policy(q) == Action.UP).all()


@given(st.floats(-50, 50))
def test_greedy_policy_shift_invariant(c):
    rng = np.random.default_rng(0)
    q = rng.normal(size=(25, 4))
    assert np.array_equal(greedy_policy(q), greedy_policy(q + c))
