"""Stochastic grid world: geometry, reward sampling, and the exact transition model.

The default instance is a 5x5 grid with two special cells. Taking any action
from a special cell flips a coin: on success the agent collects the cell's
reward and jumps to the cell's destination, otherwise it earns nothing and
stays put. Everywhere else movement follows the chosen action; walking into
a wall costs ``wall_penalty`` and leaves the agent in place.

States are indexed row-major, pairs as ``state_index * 4 + action``; that
flat order is the canonical iteration order used throughout the package.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Action(IntEnum):
    """The four moves, in canonical order."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)

# (drow, dcol) indexed by Action value
_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class State:
    row: int
    col: int


@dataclass(frozen=True)
class SpecialCell:
    """A cell whose actions all trigger the same jump-with-reward coin flip."""

    source: State
    destination: State
    reward: float
    success_prob: float = 0.5


@dataclass(frozen=True)
class Transition:
    prob: float
    reward: float
    next: State


def _classic_specials() -> tuple[SpecialCell, ...]:
    # A=(0,1) -> A'=(4,1) worth +10, B=(0,3) -> B'=(2,3) worth +5,
    # both resolving at 50%.
    return (
        SpecialCell(State(0, 1), State(4, 1), 10.0, 0.5),
        SpecialCell(State(0, 3), State(2, 3), 5.0, 0.5),
    )


@dataclass(frozen=True)
class GridSpec:
    height: int = 5
    width: int = 5
    specials: tuple[SpecialCell, ...] = field(default_factory=_classic_specials)
    wall_penalty: float = -1.0
    step_reward: float = 0.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")
        object.__setattr__(self, "specials", tuple(self.specials))
        seen = set()
        for cell in self.specials:
            for s in (cell.source, cell.destination):
                if not self.in_bounds(s):
                    raise ValueError(f"special cell endpoint {s} is out of bounds")
            if not 0.0 <= cell.success_prob <= 1.0:
                raise ValueError(f"success_prob {cell.success_prob} outside [0, 1]")
            if cell.source in seen:
                raise ValueError(f"duplicate special source {cell.source}")
            seen.add(cell.source)

    @property
    def n_states(self) -> int:
        return self.height * self.width

    @property
    def n_pairs(self) -> int:
        return self.n_states * N_ACTIONS

    def in_bounds(self, s: State) -> bool:
        return 0 <= s.row < self.height and 0 <= s.col < self.width

    def state_index(self, s: State) -> int:
        return s.row * self.width + s.col

    def state_at(self, index: int) -> State:
        return State(*divmod(index, self.width))

    def pair_index(self, s: State, a: Action) -> int:
        return self.state_index(s) * N_ACTIONS + int(a)

    def pair_at(self, index: int) -> tuple[State, Action]:
        si, ai = divmod(index, N_ACTIONS)
        return self.state_at(si), Action(ai)

    def special_at(self, s: State) -> SpecialCell | None:
        for cell in self.specials:
            if cell.source == s:
                return cell
        return None


def enumerate_pairs(spec: GridSpec) -> list[tuple[State, Action]]:
    """All (state, action) pairs in canonical order: row-major states, then actions."""
    return [(spec.state_at(i), a) for i in range(spec.n_states) for a in ACTIONS]


def step(spec: GridSpec, s: State, a: Action, rng) -> tuple[float, State]:
    """Sample one environment step, returning ``(reward, next_state)``.

    Consumes exactly one uniform draw from ``rng`` when ``s`` is a special
    source and none otherwise, so trajectories replay bit-for-bit. From a
    special cell the chosen action is ignored: all four actions share the
    same coin flip.
    """
    if not spec.in_bounds(s):
        raise ValueError(f"state {s} out of bounds for {spec.height}x{spec.width} grid")
    cell = spec.special_at(s)
    if cell is not None:
        if rng.random() < cell.success_prob:
            return cell.reward, cell.destination
        return 0.0, s
    dr, dc = _DELTAS[a]
    nxt = State(s.row + dr, s.col + dc)
    if not spec.in_bounds(nxt):
        return spec.wall_penalty, s
    return spec.step_reward, nxt


def transition_model(spec: GridSpec, s: State, a: Action) -> list[Transition]:
    """Exact outcome distribution of ``step`` for (s, a); probabilities sum to 1."""
    if not spec.in_bounds(s):
        raise ValueError(f"state {s} out of bounds for {spec.height}x{spec.width} grid")
    cell = spec.special_at(s)
    if cell is None:
        dr, dc = _DELTAS[a]
        nxt = State(s.row + dr, s.col + dc)
        if not spec.in_bounds(nxt):
            return [Transition(1.0, spec.wall_penalty, s)]
        return [Transition(1.0, spec.step_reward, nxt)]
    out = []
    if cell.success_prob > 0.0:
        out.append(Transition(cell.success_prob, cell.reward, cell.destination))
    if cell.success_prob < 1.0:
        out.append(Transition(1.0 - cell.success_prob, 0.0, s))
    return out


@dataclass(frozen=True)
class FlatModel:
    """Dense per-pair transition tables in canonical pair order.

    Special pairs resolve via (succ_prob, succ_reward, succ_next) with the
    failure branch staying at ``fail_next`` for zero reward; deterministic
    pairs use (det_reward, det_next). Arrays are read-only.
    """

    is_special: np.ndarray
    succ_prob: np.ndarray
    succ_reward: np.ndarray
    succ_next: np.ndarray
    fail_next: np.ndarray
    det_reward: np.ndarray
    det_next: np.ndarray


@functools.lru_cache(maxsize=None)
def flat_model(spec: GridSpec) -> FlatModel:
    k = spec.n_pairs
    is_special = np.zeros(k, dtype=np.bool_)
    succ_prob = np.zeros(k)
    succ_reward = np.zeros(k)
    succ_next = np.zeros(k, dtype=np.int64)
    fail_next = np.zeros(k, dtype=np.int64)
    det_reward = np.zeros(k)
    det_next = np.zeros(k, dtype=np.int64)
    for i, (s, a) in enumerate(enumerate_pairs(spec)):
        cell = spec.special_at(s)
        if cell is not None:
            is_special[i] = True
            succ_prob[i] = cell.success_prob
            succ_reward[i] = cell.reward
            succ_next[i] = spec.state_index(cell.destination)
            fail_next[i] = spec.state_index(s)
        else:
            dr, dc = _DELTAS[a]
            nxt = State(s.row + dr, s.col + dc)
            if spec.in_bounds(nxt):
                det_reward[i] = spec.step_reward
                det_next[i] = spec.state_index(nxt)
            else:
                det_reward[i] = spec.wall_penalty
                det_next[i] = spec.state_index(s)
    for arr in (is_special, succ_prob, succ_reward, succ_next, fail_next, det_reward, det_next):
        arr.setflags(write=False)
    return FlatModel(is_special, succ_prob, succ_reward, succ_next, fail_next, det_reward, det_next)
