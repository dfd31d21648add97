"""Quantitative evaluation: loss against the planner's table, learning-curve area,
valid-selection rate, and choice histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridworld import N_ACTIONS, GridSpec
from .multiagent import SelectionRound, TrialRecord
from .planner import OptimalQ


def loss(q, q_opt) -> float:
    """Mean absolute gap between a learned table and the reference table."""
    ref = q_opt.values if isinstance(q_opt, OptimalQ) else q_opt
    a = np.asarray(q, dtype=float).ravel()
    b = np.asarray(ref, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"table sizes differ: {a.size} vs {b.size}")
    return float(np.mean(np.abs(a - b)))


def area_under(losses) -> float:
    """Plain sum of a loss curve; lower means faster learning overall."""
    arr = np.asarray(losses, dtype=float)
    if arr.size == 0:
        raise ValueError("loss curve is empty")
    if np.any(arr < 0):
        raise ValueError("loss entries must be non-negative")
    return float(arr.sum())


def valid_rate(round_: SelectionRound, n_agents: int) -> float:
    """Fraction of the step's proposals whose updates were applied."""
    if n_agents < 1:
        raise ValueError("n_agents must be at least 1")
    return round_.valid_count / n_agents


def choice_histogram(proposals, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Counts of proposals per pair, plus the per-cell aggregation over actions.

    Returns (pair_counts of shape (n_states, 4), cell_counts of shape (height, width)).
    """
    props = np.asarray(proposals, dtype=np.int64)
    counts = np.bincount(props, minlength=spec.n_pairs).reshape(spec.n_states, N_ACTIONS)
    cells = counts.sum(axis=1).reshape(spec.height, spec.width)
    return counts, cells


def trailing_window(length: int) -> int:
    """Size of the late-learning window: the last 5% of steps, at least one."""
    return max(1, length // 20)


@dataclass
class MetricsSeries:
    """Trial-averaged curves with standard errors, plus scalar summaries.

    ``final_histogram`` is the first trial's last-step proposal histogram (it
    sums to the agent count); ``final_histogram_mean`` averages that histogram
    across all trials.
    """

    loss: np.ndarray
    loss_stderr: np.ndarray
    valid_rate: np.ndarray
    valid_rate_stderr: np.ndarray
    s_under: float
    s_under_per_trial: np.ndarray
    valid_rate_trailing: float
    valid_rate_trailing_per_trial: np.ndarray
    final_histogram: np.ndarray
    final_histogram_mean: np.ndarray
    n_agents: int
    n_trials: int


def _mean_and_stderr(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = mat.mean(axis=0)
    if mat.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, mat.std(axis=0, ddof=1) / np.sqrt(mat.shape[0])


def aggregate_trials(records: list[TrialRecord]) -> MetricsSeries:
    """Pointwise mean and standard error across trials; area on the averaged curve."""
    if not records:
        raise ValueError("no trial records to aggregate")
    lengths = {r.loss.shape[0] for r in records}
    if len(lengths) != 1:
        raise ValueError(f"trial series lengths differ: {sorted(lengths)}")
    n_agents = records[0].n_agents
    loss_mat = np.stack([r.loss for r in records])
    rate_mat = np.stack([r.valid_count / n_agents for r in records])
    loss_mean, loss_se = _mean_and_stderr(loss_mat)
    rate_mean, rate_se = _mean_and_stderr(rate_mat)
    t = loss_mean.shape[0]
    if t > 0:
        w = trailing_window(t)
        trailing = rate_mat[:, t - w:].mean(axis=1)
    else:
        trailing = np.zeros(len(records))
    n_states, n_actions = records[0].final_q.shape
    k = n_states * n_actions
    hists = np.stack([np.bincount(r.final_proposals, minlength=k) for r in records])
    return MetricsSeries(
        loss=loss_mean,
        loss_stderr=loss_se,
        valid_rate=rate_mean,
        valid_rate_stderr=rate_se,
        s_under=float(loss_mean.sum()),
        s_under_per_trial=loss_mat.sum(axis=1),
        valid_rate_trailing=float(trailing.mean()),
        valid_rate_trailing_per_trial=trailing,
        final_histogram=hists[0].reshape(n_states, n_actions),
        final_histogram_mean=hists.mean(axis=0).reshape(n_states, n_actions),
        n_agents=n_agents,
        n_trials=len(records),
    )
