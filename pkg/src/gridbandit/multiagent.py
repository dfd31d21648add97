"""Multi-agent learning engine.

N agents share one global Q-table while keeping private records of observed
update magnitudes. Each step every agent proposes one (state, action) pair;
in conflict mode duplicate proposals are resolved by picking one winner per
pair uniformly at random, in conflict-free mode the joint selection is
guaranteed pairwise distinct. Winners read a snapshot of the table taken at
the start of the step, run one environment transition for their pair, and
write their updates back; losers update nothing.

The bandit signal a winner records is the unscaled target gap
|reward + gamma * max_a' Q(next, a') - Q(pair)|; the table itself moves by
the learning rate times that gap. Recording the unscaled gap keeps the
softmax preferences meaningful as the learning rate anneals to zero.

Randomness is split into four labeled per-trial streams (selection,
permutation, environment, conflict resolution) so that, for a fixed agent
count, changing the mode never reshuffles draws of an unrelated purpose.
Per-step draw budget: N selection draws; N-1 permutation draws (conflict-free
only); N environment draws (one per agent, used only by special-cell
winners); N conflict draws (conflict mode only, one consumed per distinct
proposed pair in ascending pair order).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernel import (
    _fill_order,
    _restricted_softmax_select,
    _restricted_uniform_select,
    _softmax_select,
    run_trial_kernel,
)
from .gridworld import N_ACTIONS, GridSpec, flat_model
from .planner import value_iteration
from .policies import AgentBanditState, Schedules, q_update, record_dq, schedule_at


class Policy(Enum):
    UNIFORM = "uniform"
    BANDIT = "bandit"


class Conflict(Enum):
    ALLOWED = "allowed"
    FREE = "free"


@dataclass(frozen=True)
class Mode:
    """One of the four learning methods: {uniform, bandit} x {conflict allowed, conflict-free}."""

    policy: Policy
    conflict: Conflict


@dataclass
class SelectionRound:
    """Outcome of one joint selection: proposals per agent and the surviving winners."""

    proposals: np.ndarray  # (N,) flat pair indices
    winners: dict[int, int]  # pair index -> winning agent id

    @property
    def valid_count(self) -> int:
        return len(self.winners)


@dataclass(frozen=True)
class TrialStreams:
    """Labeled random streams for one trial."""

    selection: np.random.Generator
    permutation: np.random.Generator
    environment: np.random.Generator
    conflict: np.random.Generator

    @classmethod
    def from_seed(cls, seed) -> "TrialStreams":
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        kids = ss.spawn(4)
        return cls(*(np.random.Generator(np.random.PCG64(k)) for k in kids))


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Per-trial seed: a fixed labeled split of the master seed by trial index."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))


def zero_q_table(spec: GridSpec) -> np.ndarray:
    """Fresh shared Q-table, all entries zero."""
    return np.zeros((spec.n_states, N_ACTIONS))


def fresh_agents(spec: GridSpec, n_agents: int) -> list[AgentBanditState]:
    return [AgentBanditState.zeros(spec) for _ in range(n_agents)]


def select_conflict(agents: list[AgentBanditState], policy: Policy, beta: float,
                    streams: TrialStreams) -> np.ndarray:
    """Independent per-agent proposals over all pairs; duplicates permitted."""
    n = len(agents)
    k = agents[0].mean_dq.size
    u = streams.selection.random(n)
    props = np.empty(n, dtype=np.int64)
    for i, agent in enumerate(agents):
        if policy is Policy.BANDIT:
            props[i] = _softmax_select(agent.mean_dq.ravel(), beta, u[i])
        else:
            props[i] = min(int(u[i] * k), k - 1)
    return props


def select_conflict_free(agents: list[AgentBanditState], policy: Policy, beta: float,
                         streams: TrialStreams) -> np.ndarray:
    """Pairwise-distinct proposals.

    Agents draw in a uniformly random order; each samples from its own
    distribution restricted to the still-unselected pairs, renormalized
    (uniform over the remainder if the restricted mass underflows to zero).
    """
    n = len(agents)
    k = agents[0].mean_dq.size
    if n > k:
        raise ValueError(f"cannot pick {n} distinct pairs out of {k}")
    order = np.empty(n, dtype=np.int64)
    _fill_order(order, streams.permutation.random(max(n - 1, 0)))
    u = streams.selection.random(n)
    taken = np.zeros(k, dtype=np.bool_)
    props = np.empty(n, dtype=np.int64)
    for pos in range(n):
        a_id = int(order[pos])
        if policy is Policy.BANDIT:
            sel = _restricted_softmax_select(agents[a_id].mean_dq.ravel(), beta, taken, u[a_id])
        else:
            sel = _restricted_uniform_select(taken, k - pos, u[a_id])
        taken[sel] = True
        props[a_id] = sel
    return props


def resolve_conflicts(proposals, streams: TrialStreams) -> SelectionRound:
    """Pick one winner per distinct proposed pair, uniformly among its proposers.

    Consumes one conflict draw per distinct pair, in ascending pair order.
    """
    props = np.asarray(proposals, dtype=np.int64)
    if props.size == 0:
        raise ValueError("proposals must be non-empty")
    u = streams.conflict.random(props.size)
    by_pair: dict[int, list[int]] = {}
    for agent, p in enumerate(props):
        by_pair.setdefault(int(p), []).append(agent)
    winners = {}
    for j, pair in enumerate(sorted(by_pair)):
        proposers = by_pair[pair]
        wi = min(int(u[j] * len(proposers)), len(proposers) - 1)
        winners[pair] = proposers[wi]
    return SelectionRound(proposals=props, winners=winners)


def exact_two_agent_exclusion(p1, p2) -> np.ndarray:
    """Joint law of two agents forced onto distinct options: P(i, j) proportional to p1_i * p2_j, i != j.

    Reference model of a two-agent interference-style chooser; used as a
    small-scale oracle for the sequential conflict-free sampler.
    """
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("p1 and p2 must be 1-D distributions over at least two options")
    joint = np.outer(a, b)
    np.fill_diagonal(joint, 0.0)
    z = joint.sum()
    if z <= 0.0:
        raise ValueError("no valid distinct outcome: both distributions sit on one option")
    return joint / z


def _apply_updates(q: np.ndarray, agents: list[AgentBanditState], spec: GridSpec,
                   winners_in_order, u_env: np.ndarray, alpha: float, gamma: float) -> None:
    """Run env transitions and write back winner updates against a start-of-step snapshot.

    ``winners_in_order`` yields (pair index, agent id); the result is invariant
    to that order because all reads hit the snapshot, writes touch distinct
    pairs, and each agent's coin flip is pre-assigned in ``u_env``.
    """
    model = flat_model(spec)
    q_flat = q.ravel()
    q_snap = q_flat.copy()
    for pair, agent_id in winners_in_order:
        if model.is_special[pair]:
            if u_env[agent_id] < model.succ_prob[pair]:
                reward, nxt = model.succ_reward[pair], model.succ_next[pair]
            else:
                reward, nxt = 0.0, model.fail_next[pair]
        else:
            reward, nxt = model.det_reward[pair], model.det_next[pair]
        mxq = q_snap[nxt * N_ACTIONS:(nxt + 1) * N_ACTIONS].max()
        q_old = q_snap[pair]
        q_new, _ = q_update(q_old, reward, mxq, alpha, gamma)
        q_flat[pair] = q_new
        # agents rank pairs by the unscaled target gap; see module docstring
        record_dq(agents[agent_id], divmod(pair, N_ACTIONS), abs(reward + gamma * mxq - q_old))


def multi_agent_step(q: np.ndarray, agents: list[AgentBanditState], spec: GridSpec,
                     mode: Mode, t: int, schedules: Schedules, streams: TrialStreams,
                     gamma: float = 0.9) -> tuple[np.ndarray, list[AgentBanditState], SelectionRound]:
    """Advance the shared table by one synchronous step; mutates ``q`` and ``agents``.

    In conflict-free mode the conflict stream is untouched (resolution is the
    identity); in conflict mode the permutation stream is untouched.
    """
    if t >= schedules.horizon:
        raise ValueError(f"t={t} is past the horizon {schedules.horizon}")
    alpha, beta = schedule_at(schedules, t)
    if mode.conflict is Conflict.FREE:
        proposals = select_conflict_free(agents, mode.policy, beta, streams)
        u_env = streams.environment.random(len(agents))
        round_ = SelectionRound(proposals=proposals,
                                winners={int(p): i for i, p in enumerate(proposals)})
        if round_.valid_count != len(agents):
            raise AssertionError("conflict-free proposals were not pairwise distinct")
    else:
        proposals = select_conflict(agents, mode.policy, beta, streams)
        u_env = streams.environment.random(len(agents))
        round_ = resolve_conflicts(proposals, streams)
    _apply_updates(q, agents, spec, sorted(round_.winners.items()), u_env, alpha, gamma)
    return q, agents, round_


@dataclass
class TrialRecord:
    """Per-trial time series consumed by the metrics layer."""

    loss: np.ndarray  # (T,) mean |qstar - q| after each step
    valid_count: np.ndarray  # (T,) int
    final_proposals: np.ndarray  # (N,) flat pair indices at the last step
    final_q: np.ndarray  # (n_states, N_ACTIONS)
    n_agents: int


def run_trial(config, trial_seed_value) -> TrialRecord:
    """Execute one full trial from an all-zero table; bit-deterministic in (config, seed)."""
    spec = config.grid
    sched = config.schedules
    n = config.n_agents
    T = sched.horizon
    K = spec.n_pairs
    if n > K:
        raise ValueError(f"{n} agents cannot share {K} pairs conflict-free")
    qstar = value_iteration(spec, config.gamma).values.ravel()
    if T == 0:
        return TrialRecord(loss=np.empty(0), valid_count=np.empty(0, dtype=np.int64),
                           final_proposals=np.empty(0, dtype=np.int64),
                           final_q=zero_q_table(spec), n_agents=n)
    streams = TrialStreams.from_seed(trial_seed_value)
    conflict_free = config.mode.conflict is Conflict.FREE
    bandit = config.mode.policy is Policy.BANDIT
    u_sel = streams.selection.random((T, n))
    u_perm = streams.permutation.random((T, n - 1)) if conflict_free else np.zeros((T, 0))
    u_env = streams.environment.random((T, n))
    u_conf = np.zeros((T, 0)) if conflict_free else streams.conflict.random((T, n))
    model = flat_model(spec)
    q, _mu, _cnt, loss, valid, props = run_trial_kernel(
        T, n, K, qstar,
        sched.alpha0, sched.alpha_final, sched.beta0, sched.beta_final, config.gamma,
        bandit, conflict_free,
        model.is_special, model.succ_prob, model.succ_reward, model.succ_next,
        model.fail_next, model.det_reward, model.det_next,
        u_sel, u_perm, u_env, u_conf)
    return TrialRecord(loss=loss, valid_count=valid, final_proposals=props,
                       final_q=q.reshape(spec.n_states, N_ACTIONS), n_agents=n)
