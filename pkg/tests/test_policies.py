import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gridbandit import (
    Action,
    AgentBanditState,
    GridSpec,
    Schedules,
    epsilon_greedy,
    q_update,
    record_dq,
    schedule_at,
    softmax_probs,
)

finite = st.floats(-100, 100, allow_nan=False)


def test_schedule_defaults_at_endpoints():
    sched = Schedules()
    assert schedule_at(sched, 0) == (0.035, 1.0)
    assert schedule_at(sched, 20_000) == (0.0, 5.0)


def test_schedule_midpoint():
    sched = Schedules()
    alpha, beta = schedule_at(sched, 10_000)
    assert alpha == pytest.approx(0.0175, abs=1e-15)
    assert beta == pytest.approx(3.0, abs=1e-12)


def test_schedule_rejects_out_of_range_t():
    sched = Schedules(horizon=100)
    with pytest.raises(ValueError):
        schedule_at(sched, 101)
    with pytest.raises(ValueError):
        schedule_at(sched, -1)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedules(alpha0=1.5)
    with pytest.raises(ValueError):
        Schedules(beta0=-0.1)
    with pytest.raises(ValueError):
        Schedules(horizon=-1)


def test_q_update_fixed_point():
    assert q_update(0.0, 0.0, 0.0, 0.5, 0.9) == (0.0, 0.0)


def test_q_update_full_replacement():
    q_new, dq = q_update(3.0, 2.0, 10.0, 1.0, 0.9)
    assert q_new == 2.0 + 0.9 * 10.0
    assert dq == abs(q_new - 3.0)


def test_q_update_example_arithmetic():
    q_new, dq = q_update(0.0, 10.0, 0.0, 0.035, 0.9)
    assert q_new == 0.35
    assert dq == 0.35


@given(finite, finite, finite,
       st.floats(0, 1, allow_nan=False), st.floats(0, 0.99, allow_nan=False))
def test_q_update_contracts_toward_target(q_old, reward, max_next, alpha, gamma):
    target = reward + gamma * max_next
    q_new, dq = q_update(q_old, reward, max_next, alpha, gamma)
    assert abs(q_new - target) == pytest.approx((1 - alpha) * abs(q_old - target),
                                                rel=1e-12, abs=1e-9)
    lo, hi = min(q_old, target), max(q_old, target)
    assert lo - 1e-9 <= q_new <= hi + 1e-9
    assert dq >= 0


def test_softmax_uniform_cases():
    assert np.allclose(softmax_probs(np.full(100, 2.5), 3.0), 0.01)
    assert np.allclose(softmax_probs(np.linspace(0, 5, 100), 0.0), 0.01)


def test_softmax_direct_evaluation():
    probs = softmax_probs(np.array([1.0, 0.0]), np.log(2.0))
    assert probs == pytest.approx([2 / 3, 1 / 3], abs=1e-15)


def test_softmax_normalization_and_positivity():
    rng = np.random.default_rng(5)
    probs = softmax_probs(rng.uniform(0, 10, size=(25, 4)), 4.0)
    assert probs.shape == (100,)
    assert abs(probs.sum() - 1.0) <= 1e-12
    assert (probs > 0).all()


def test_softmax_overflow_safe():
    probs = softmax_probs(np.array([500.0, 0.0, 1.0]), 10.0)
    assert np.isfinite(probs).all()
    assert probs[0] == pytest.approx(1.0)


def test_softmax_rejects_non_finite():
    with pytest.raises(ValueError):
        softmax_probs(np.array([1.0, np.nan]), 1.0)


@given(st.floats(-20, 20), st.floats(0, 8))
@settings(max_examples=40)
def test_softmax_shift_invariant(c, beta):
    rng = np.random.default_rng(3)
    mu = rng.uniform(0, 3, 40)
    assert np.allclose(softmax_probs(mu, beta), softmax_probs(mu + c, beta), atol=1e-12)


@given(st.integers(0, 39), st.floats(0.01, 1.0), st.floats(0.1, 5.0))
@settings(max_examples=40)
def test_softmax_monotone_in_single_entry(idx, bump, beta):
    rng = np.random.default_rng(8)
    mu = rng.uniform(0, 3, 40)
    before = softmax_probs(mu, beta)
    mu2 = mu.copy()
    mu2[idx] += bump
    after = softmax_probs(mu2, beta)
    assert after[idx] > before[idx]
    others = np.arange(40) != idx
    assert (after[others] < before[others]).all()


def test_epsilon_one_is_uniform(rng):
    q = np.tile(np.array([9.0, 1.0, 1.0, 1.0]), (25, 1))
    draws = [int(epsilon_greedy(q, 3, 1.0, rng)) for _ in range(100_000)]
    counts = np.bincount(draws, minlength=4)
    assert stats.chisquare(counts).pvalue > 0.01


def test_epsilon_zero_unique_max(rng):
    q = np.zeros((25, 4))
    q[7, 2] = 1.0
    assert all(epsilon_greedy(q, 7, 0.0, rng) is Action.LEFT for _ in range(100))


def test_epsilon_zero_tie_break_uniform(rng):
    q = np.zeros((25, 4))
    q[4, 1] = q[4, 3] = 2.0
    n = 100_000
    draws = np.array([int(epsilon_greedy(q, 4, 0.0, rng)) for _ in range(n)])
    assert set(np.unique(draws)) == {1, 3}
    share = (draws == 1).mean()
    assert abs(share - 0.5) <= 3 * (0.25 / n) ** 0.5


def test_record_dq_first_observation(spec):
    agent = AgentBanditState.zeros(spec)
    record_dq(agent, (1, 0), 0.35)
    assert agent.mean_dq[1, 0] == 0.35
    assert agent.count[1, 0] == 1


def test_record_dq_running_mean(spec):
    agent = AgentBanditState.zeros(spec)
    record_dq(agent, (1, 0), 0.35)
    record_dq(agent, (1, 0), 0.05)
    assert agent.mean_dq[1, 0] == pytest.approx(0.20, abs=1e-15)
    assert agent.count[1, 0] == 2


def test_record_dq_rejects_negative(spec):
    agent = AgentBanditState.zeros(spec)
    with pytest.raises(ValueError):
        record_dq(agent, (0, 0), -0.01)


def test_record_dq_matches_batch_mean_large(spec):
    rng = np.random.default_rng(17)
    values = rng.uniform(0, 100, 1_000_000)
    agent = AgentBanditState.zeros(spec)
    for v in values:
        record_dq(agent, (2, 1), v)
    assert agent.mean_dq[2, 1] == pytest.approx(values.mean(), abs=1e-9)
    assert agent.count[2, 1] == values.size


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=200))
@settings(max_examples=60)
def test_record_dq_matches_batch_mean(values):
    agent = AgentBanditState.zeros(GridSpec())
    for v in values:
        record_dq(agent, (0, 0), v)
    assert agent.mean_dq[0, 0] == pytest.approx(np.mean(values), rel=1e-12, abs=1e-12)


def test_fresh_state_is_zeroed(spec):
    agent = AgentBanditState.zeros(spec)
    assert (agent.mean_dq == 0).all()
    assert (agent.count == 0).all()
    assert agent.count.dtype == np.int64
