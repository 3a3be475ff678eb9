"""Experience replay and the danger/safe state stores used to train the fear model."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .envs import ACTIONS


@dataclass(frozen=True)
class Transition:
    """One experience; ``a`` is the environment action (-1 or +1)."""

    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool
    catastrophe: bool = False

    def __post_init__(self):
        if self.catastrophe and not self.terminal:
            raise ValueError("catastrophe implies terminal")


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions, stored column-wise."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.catastrophe = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        i = self.cursor
        self.s[i] = t.s
        self.s_next[i] = t.s_next
        self.a[i] = ACTIONS.index(t.a)
        self.r[i] = t.r
        self.terminal[i] = t.terminal
        self.catastrophe[i] = t.catastrophe
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _ordered_index(self, k: int) -> int:
        # k-th oldest -> physical slot
        start = self.cursor if self.size == self.capacity else 0
        return (start + k) % self.capacity

    def get(self, k: int) -> Transition:
        """The k-th oldest stored transition."""
        if not 0 <= k < self.size:
            raise IndexError(k)
        i = self._ordered_index(k)
        return Transition(self.s[i].copy(), ACTIONS[int(self.a[i])], float(self.r[i]),
                          self.s_next[i].copy(), bool(self.terminal[i]), bool(self.catastrophe[i]))

    def sample_indices(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0 or k == 0:
            return np.zeros(0, dtype=np.int64)
        return rng.integers(0, self.size, size=k)

    def sample_arrays(self, k: int, rng: np.random.Generator):
        """Uniform draws with replacement as (s, a, r, s_next, terminal, catastrophe) arrays."""
        idx = self.sample_indices(k, rng)
        return (self.s[idx], self.a[idx], self.r[idx], self.s_next[idx],
                self.terminal[idx], self.catastrophe[idx])

    def sample_uniform(self, k: int, rng: np.random.Generator) -> list[Transition]:
        # indices are drawn over the filled region, order does not matter for uniformity
        return [self.get(int(i)) for i in self.sample_indices(k, rng)]


def push(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.push(t)


def sample_uniform(buffer: ReplayBuffer, k: int, rng: np.random.Generator) -> list[Transition]:
    return buffer.sample_uniform(k, rng)


def label_episode(states, ended_in_catastrophe: bool, k_r: int):
    """Split an episode's states into (danger, safe) lists.

    The last ``k_r`` states before a catastrophe are danger and the rest are
    safe; short catastrophic episodes are entirely danger, and episodes that
    ended without catastrophe are entirely safe.
    """
    states = [np.array(s, dtype=float, copy=True) for s in states]
    if k_r < 0:
        raise ValueError("fear radius must be non-negative")
    if not ended_in_catastrophe:
        return [], states
    n = len(states)
    if n <= k_r:
        return states, []
    return states[n - k_r:], states[:n - k_r]


class StateStore:
    """Bounded FIFO store of state vectors."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.data = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def extend(self, states) -> None:
        for s in states:
            self.data[self.cursor] = s
            self.cursor = (self.cursor + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return self.data[rng.integers(0, self.size, size=k)]

    def contents(self) -> np.ndarray:
        if self.size < self.capacity:
            return self.data[:self.size].copy()
        return np.roll(self.data, -self.cursor, axis=0)


class FearBuffers:
    def __init__(self, state_dim: int, capacity: int = 10_000):
        self.danger = StateStore(capacity, state_dim)
        self.safe = StateStore(capacity, state_dim)

    def add_episode(self, states, ended_in_catastrophe: bool, k_r: int) -> None:
        danger, safe = label_episode(states, ended_in_catastrophe, k_r)
        self.danger.extend(danger)
        self.safe.extend(safe)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            dim = self.danger.data.shape[1]
            w.writerow(["store", *[f"s{i}" for i in range(dim)]])
            for name, store in (("danger", self.danger), ("safe", self.safe)):
                for s in store.contents():
                    w.writerow([name, *(repr(float(v)) for v in s)])


def sample_fear_batch(buffers: FearBuffers, k: int, rng: np.random.Generator):
    """Balanced batch: ceil(k/2) danger states labelled 1, floor(k/2) safe labelled 0.

    Returns ``None`` while the danger store is empty (training deferred).  If
    the safe store is empty the whole batch is drawn from danger.
    """
    if len(buffers.danger) == 0:
        return None
    n_danger = (k + 1) // 2
    n_safe = k - n_danger
    if len(buffers.safe) == 0:
        n_danger, n_safe = k, 0
    X = np.concatenate([buffers.danger.sample(n_danger, rng), buffers.safe.sample(n_safe, rng)])
    y = np.concatenate([np.ones(n_danger), np.zeros(n_safe)])
    return X, y
