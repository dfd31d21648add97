"""Dynamic-programming ground truth for the grid world's action values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridworld import N_ACTIONS, GridSpec, flat_model


@dataclass(frozen=True)
class OptimalQ:
    """Converged optimal action-value table with its convergence certificate."""

    values: np.ndarray  # (n_states, N_ACTIONS)
    gamma: float
    residual: float


def _backup(model, q_flat: np.ndarray, gamma: float) -> np.ndarray:
    """One synchronous Bellman-optimality sweep over all pairs."""
    v = q_flat.reshape(-1, N_ACTIONS).max(axis=1)
    special = model.succ_prob * (model.succ_reward + gamma * v[model.succ_next]) + (
        1.0 - model.succ_prob
    ) * (gamma * v[model.fail_next])
    det = model.det_reward + gamma * v[model.det_next]
    return np.where(model.is_special, special, det)


def value_iteration(spec: GridSpec, gamma: float, tol: float = 1e-10,
                    max_sweeps: int = 100_000) -> OptimalQ:
    """Solve for the optimal action-value table by synchronous sweeps.

    Stops on the Bellman residual, not the sweep count; the returned table is
    certified to have max-norm residual <= tol.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1) to guarantee convergence, got {gamma}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    model = flat_model(spec)
    q = np.zeros(spec.n_pairs)
    for _ in range(max_sweeps):
        tq = _backup(model, q, gamma)
        resid = float(np.max(np.abs(tq - q)))
        if resid <= tol:
            return OptimalQ(values=q.reshape(spec.n_states, N_ACTIONS), gamma=gamma,
                            residual=resid)
        q = tq
    raise RuntimeError(f"value iteration did not reach tol={tol} in {max_sweeps} sweeps")


def greedy_policy(q) -> np.ndarray:
    """Per-state argmax action indices; ties resolve to the first action in canonical order."""
    q2 = np.asarray(q, dtype=float).reshape(-1, N_ACTIONS)
    return q2.argmax(axis=1)


def bellman_residual(spec: GridSpec, q, gamma: float) -> float:
    """Max-norm distance between ``q`` and its one-sweep Bellman backup."""
    q_flat = np.asarray(q, dtype=float).ravel()
    if q_flat.size != spec.n_pairs:
        raise ValueError(f"table has {q_flat.size} entries, expected {spec.n_pairs}")
    return float(np.max(np.abs(_backup(flat_model(spec), q_flat, gamma) - q_flat)))
