"""Finite MDPs with a designated danger zone, and policy helpers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ROW_TOL = 1e-12


class MdpError(ValueError):
    pass


@dataclass
class TabularMdp:
    """(S, A, T, R, gamma) plus a boolean danger mask over states.

    ``T[s, a, s']`` is the transition probability and ``R[s, a]`` the mean
    reward.  Unshaped MDPs keep rewards in [0, 1]; ``shaped`` relaxes that to
    finiteness once a fear penalty has been subtracted.
    """

    T: np.ndarray
    R: np.ndarray
    gamma: float = 1.0
    danger: np.ndarray | None = None
    start: np.ndarray | None = None
    shaped: bool = field(default=False)

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.T.ndim != 3 or self.T.shape[0] != self.T.shape[2]:
            raise MdpError(f"T must be [S, A, S], got {self.T.shape}")
        S, A, _ = self.T.shape
        if self.R.shape != (S, A):
            raise MdpError(f"R must be [S, A] = {(S, A)}, got {self.R.shape}")
        if np.any(self.T < 0) or np.max(np.abs(self.T.sum(axis=2) - 1.0)) > ROW_TOL:
            raise MdpError("each T[s, a, :] must be a probability vector")
        if not np.all(np.isfinite(self.R)):
            raise MdpError("rewards must be finite")
        if not self.shaped and (self.R.min() < 0.0 or self.R.max() > 1.0):
            raise MdpError("unshaped rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise MdpError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.danger is None:
            self.danger = np.zeros(S, dtype=bool)
        self.danger = np.asarray(self.danger, dtype=bool)
        if self.danger.shape != (S,):
            raise MdpError("danger mask must have one entry per state")
        if self.start is not None:
            self.start = np.asarray(self.start, dtype=float)
            if self.start.shape != (S,) or abs(self.start.sum() - 1.0) > 1e-9 or np.any(self.start < 0):
                raise MdpError("start must be a distribution over states")

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    def with_rewards(self, R, shaped: bool = True) -> "TabularMdp":
        return replace(self, R=np.asarray(R, dtype=float), shaped=shaped)


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, gamma: float = 1.0,
               danger_size: int | None = None) -> TabularMdp:
    """Dirichlet(1) transition rows, Uniform[0, 1] rewards, 1-2 danger states."""
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    T /= T.sum(axis=2, keepdims=True)
    R = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    if danger_size is None:
        danger_size = int(rng.integers(1, 3))
    danger_size = min(danger_size, n_states)
    danger = np.zeros(n_states, dtype=bool)
    danger[rng.choice(n_states, size=danger_size, replace=False)] = True
    return TabularMdp(T, R, gamma, danger)


def policy_matrix(mdp: TabularMdp, policy) -> np.ndarray:
    """Deterministic action vector or [S, A] stochastic matrix -> [S, A] matrix."""
    policy = np.asarray(policy)
    S, A = mdp.n_states, mdp.n_actions
    if policy.shape == (S,):
        if not np.issubdtype(policy.dtype, np.integer):
            raise MdpError("deterministic policies must be integer action indices")
        if np.any(policy < 0) or np.any(policy >= A):
            raise MdpError("action index out of range")
        pi = np.zeros((S, A))
        pi[np.arange(S), policy] = 1.0
        return pi
    if policy.shape == (S, A):
        pi = policy.astype(float)
        if np.any(pi < -1e-12) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > 1e-9:
            raise MdpError("stochastic policy rows must be distributions")
        return pi
    raise MdpError(f"policy shape {policy.shape} fits neither ({S},) nor ({S}, {A})")


def induced_chain(mdp: TabularMdp, policy) -> tuple[np.ndarray, np.ndarray]:
    """State-to-state transition matrix and per-state reward under ``policy``."""
    pi = policy_matrix(mdp, policy)
    P = np.einsum("sa,sat->st", pi, mdp.T)
    r = np.einsum("sa,sa->s", pi, mdp.R)
    return P, r
