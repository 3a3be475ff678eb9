"""Exact tabular solvers: dynamic programming, stationary laws, occupancy LPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .mdp import MdpError, TabularMdp, induced_chain, policy_matrix
from .simplex import FEAS_TOL, LPError, solve_lp


class NotUnichainError(MdpError):
    """The policy's chain has more than one closed recurrent class."""


def _gamma(mdp: TabularMdp, gamma) -> float:
    g = mdp.gamma if gamma is None else gamma
    if not 0.0 <= g < 1.0:
        raise MdpError(f"discounted solver needs gamma in [0, 1); got {g} (use occupancy_lp for gamma = 1)")
    return float(g)


def policy_evaluation(mdp: TabularMdp, policy, gamma: float | None = None) -> np.ndarray:
    """Solve (I - gamma P_pi) V = r_pi exactly."""
    g = _gamma(mdp, gamma)
    P, r = induced_chain(mdp, policy)
    return np.linalg.solve(np.eye(mdp.n_states) - g * P, r)


def q_values(mdp: TabularMdp, V: np.ndarray, gamma: float) -> np.ndarray:
    return mdp.R + gamma * np.einsum("sat,t->sa", mdp.T, V)


def greedy(Q: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Greedy actions; values within ``tol`` of the row maximum tie to the lowest index."""
    best = Q.max(axis=1, keepdims=True)
    return np.argmax(Q >= best - tol, axis=1)


def value_iteration(mdp: TabularMdp, gamma: float | None = None, tol: float = 1e-12,
                    max_iter: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal values and a deterministic optimal policy (lowest-index ties).

    Bellman iteration runs until the sup-norm residual is at most ``tol``;
    the greedy policy is then refined by exact policy improvement so the
    returned policy is optimal rather than merely near-optimal, and V is its
    exact value.
    """
    g = _gamma(mdp, gamma)
    V = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        V_new = q_values(mdp, V, g).max(axis=1)
        done = np.max(np.abs(V_new - V)) <= tol
        V = V_new
        if done:
            break
    else:
        raise MdpError("value iteration did not converge")
    scale = max(1.0, float(np.max(np.abs(V))))
    policy = greedy(q_values(mdp, V, g), tol=1e-10 * scale)
    for _ in range(10 * mdp.n_states * mdp.n_actions + 10):
        V = policy_evaluation(mdp, policy, g)
        Q = q_values(mdp, V, g)
        current = Q[np.arange(mdp.n_states), policy]
        improve = Q.max(axis=1) > current + 1e-12 * scale
        if not improve.any():
            break
        policy = np.where(improve, np.argmax(Q, axis=1), policy)
    return V, policy


def closed_classes(P: np.ndarray) -> list[list[int]]:
    """Closed communicating classes of a stochastic matrix."""
    adj = (P > 0).astype(int)
    n, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    for k in range(n):
        members = np.flatnonzero(labels == k)
        outside = np.setdiff1d(np.arange(P.shape[0]), members)
        if not np.any(P[np.ix_(members, outside)] > 0):
            out.append(members.tolist())
    return out


def stationary_distribution(mdp: TabularMdp, policy) -> np.ndarray:
    P, _ = induced_chain(mdp, policy)
    return chain_stationary(P)


def chain_stationary(P: np.ndarray) -> np.ndarray:
    classes = closed_classes(P)
    if len(classes) != 1:
        raise NotUnichainError(f"chain has {len(classes)} closed classes {classes}; "
                               "stationary distribution is not unique")
    S = P.shape[0]
    M = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    rhs = np.zeros(S + 1)
    rhs[-1] = 1.0
    w = np.linalg.lstsq(M, rhs, rcond=None)[0]
    w = np.maximum(w, 0.0)
    return w / w.sum()


def discounted_visitation(mdp: TabularMdp, policy, gamma: float, start) -> np.ndarray:
    """(1 - gamma) * start^T (I - gamma P_pi)^-1."""
    P, _ = induced_chain(mdp, policy)
    d = np.linalg.solve((np.eye(mdp.n_states) - gamma * P).T, np.asarray(start, dtype=float))
    return (1.0 - gamma) * d


def average_return(mdp: TabularMdp, policy, gamma: float | None = None, start=None) -> float:
    """Long-run average reward (gamma = 1) or normalised discounted return.

    For gamma < 1 the return is (1 - gamma) * start^T V with ``start``
    defaulting to ``mdp.start`` and then to the uniform distribution.
    """
    g = 1.0 if gamma is None else gamma
    if g >= 1.0:
        P, r = induced_chain(mdp, policy)
        return float(chain_stationary(P) @ r)
    rho = _start(mdp, start)
    return float((1.0 - g) * rho @ policy_evaluation(mdp, policy, g))


def _start(mdp: TabularMdp, start) -> np.ndarray:
    if start is not None:
        return np.asarray(start, dtype=float)
    if mdp.start is not None:
        return mdp.start
    return np.full(mdp.n_states, 1.0 / mdp.n_states)


@dataclass
class OccupancyResult:
    eta: float
    mu: np.ndarray        # [S, A]
    policy: np.ndarray    # [S, A] stochastic matrix
    danger_mass: float


def occupancy_constraints(mdp: TabularMdp, gamma: float | None = None, start=None):
    """Equality system of the occupancy polytope, variables mu flattened row-major."""
    S, A = mdp.n_states, mdp.n_actions
    # flow: sum_a mu(s', a) - g * sum_{s,a} T(s'|s,a) mu(s,a) = (1 - g) rho(s')
    g = 1.0 if gamma is None else float(gamma)
    out_flow = np.kron(np.eye(S), np.ones((1, A)))      # [S, S*A]
    in_flow = mdp.T.reshape(S * A, S).T                  # [S, S*A]
    A_eq = out_flow - g * in_flow
    if g >= 1.0:
        b_eq = np.zeros(S)
    else:
        b_eq = (1.0 - g) * _start(mdp, start)
    A_eq = np.vstack([A_eq, np.ones((1, S * A))])
    b_eq = np.concatenate([b_eq, [1.0]])
    return A_eq, b_eq


def occupancy_lp(mdp: TabularMdp, gamma: float | None = None, start=None,
                 minimize_danger: bool = True) -> OccupancyResult:
    """Maximize expected reward over occupancy measures.

    Average-reward case by default; pass ``gamma < 1`` for the normalised
    discounted polytope.  Among optimal measures, the one with the least
    mass on ``mdp.danger`` is selected.
    """
    S, A = mdp.n_states, mdp.n_actions
    A_eq, b_eq = occupancy_constraints(mdp, gamma, start)
    c = mdp.R.ravel()
    danger = np.repeat(mdp.danger.astype(float), A)
    try:
        res = solve_lp(c, A_eq, b_eq, secondary=-danger if minimize_danger else None)
    except LPError as e:
        raise MdpError(f"occupancy LP failed: {e}") from e
    mu = res.x.reshape(S, A)
    resid = np.max(np.abs(A_eq @ res.x - b_eq))
    if resid > FEAS_TOL:
        raise MdpError(f"occupancy measure violates flow constraints by {resid:.3g}")
    return OccupancyResult(float(c @ res.x), mu, recover_policy(mu), float(danger @ res.x))


def recover_policy(mu: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """pi(a|s) = mu(s,a) / sum_a mu(s,a); lowest action where the marginal vanishes."""
    S, A = mu.shape
    marg = mu.sum(axis=1)
    pi = np.zeros((S, A))
    live = marg > tol
    pi[live] = mu[live] / marg[live, None]
    pi[~live, 0] = 1.0
    return pi
