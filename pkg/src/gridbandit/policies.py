"""Selection rules and Q-update arithmetic.

The learning signal for pair selection is the magnitude of each Q-update:
agents keep a per-pair running mean of observed |dQ| and choose pairs by a
softmax over those means. A classic per-state epsilon-greedy rule is kept as
the reference baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridworld import N_ACTIONS, Action, GridSpec


@dataclass(frozen=True)
class Schedules:
    """Linear learning-rate and inverse-temperature schedules over a fixed horizon."""

    alpha0: float = 0.035
    alpha_final: float = 0.0
    beta0: float = 1.0
    beta_final: float = 5.0
    horizon: int = 20_000

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        for name in ("alpha0", "alpha_final"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("beta0", "beta_final"):
            v = getattr(self, name)
            if v < 0.0:
                raise ValueError(f"{name}={v} must be non-negative")


def schedule_at(sched: Schedules, t: int) -> tuple[float, float]:
    """(alpha_t, beta_t) by linear interpolation between the endpoints."""
    if not 0 <= t <= sched.horizon:
        raise ValueError(f"t={t} outside [0, {sched.horizon}]")
    if t == 0:
        return sched.alpha0, sched.beta0
    alpha = sched.alpha0 + (sched.alpha_final - sched.alpha0) * t / sched.horizon
    beta = sched.beta0 + (sched.beta_final - sched.beta0) * t / sched.horizon
    return alpha, beta


def q_update(q_old: float, reward: float, max_next_q: float, alpha: float,
             gamma: float) -> tuple[float, float]:
    """One temporal-difference update; returns (q_new, |q_new - q_old|).

    q_new moves the fraction ``alpha`` of the way from q_old toward
    ``reward + gamma * max_next_q``.
    """
    q_new = q_old + alpha * (reward + gamma * max_next_q - q_old)
    return q_new, abs(q_new - q_old)


def softmax_probs(mean_dq, beta: float) -> np.ndarray:
    """Selection probabilities over all pairs: softmax of beta * mean_dq.

    The table is flattened in canonical pair order. The maximum is subtracted
    before exponentiation so large beta * mean_dq cannot overflow.
    """
    mu = np.asarray(mean_dq, dtype=float).ravel()
    if not np.all(np.isfinite(mu)):
        raise ValueError("mean_dq contains non-finite entries")
    z = beta * mu
    w = np.exp(z - z.max())
    return w / w.sum()


def epsilon_greedy(q, state: int, epsilon: float, rng) -> Action:
    """Per-state action choice: uniform with probability epsilon, else greedy.

    ``q`` is a (n_states, 4) table and ``state`` a flat state index. Greedy
    ties break uniformly at random among the maximal actions.
    """
    q2 = np.asarray(q, dtype=float).reshape(-1, N_ACTIONS)
    if rng.random() < epsilon:
        return Action(int(rng.integers(N_ACTIONS)))
    row = q2[state]
    best = np.flatnonzero(row == row.max())
    if best.size == 1:
        return Action(int(best[0]))
    return Action(int(best[rng.integers(best.size)]))


@dataclass
class AgentBanditState:
    """Per-agent record of observed update magnitudes: running mean and visit count."""

    mean_dq: np.ndarray  # float (n_states, N_ACTIONS)
    count: np.ndarray  # int64, same shape

    @classmethod
    def zeros(cls, spec: GridSpec) -> "AgentBanditState":
        shape = (spec.n_states, N_ACTIONS)
        return cls(mean_dq=np.zeros(shape), count=np.zeros(shape, dtype=np.int64))


def record_dq(state: AgentBanditState, pair: tuple[int, int], delta_q: float) -> AgentBanditState:
    """Fold one observed |dQ| for ``pair`` (state index, action index) into the running mean.

    Updates ``state`` in place and returns it. The incremental form
    mu += (dq - mu) / n keeps the mean stable over long histories.
    """
    if delta_q < 0.0:
        raise ValueError(f"delta_q must be non-negative, got {delta_q}")
    si, ai = pair
    state.count[si, ai] += 1
    state.mean_dq[si, ai] += (delta_q - state.mean_dq[si, ai]) / state.count[si, ai]
    return state
