"""Dense two-phase tableau simplex with Bland's rule.

Solves   maximize c.x   subject to   A x = b,  x >= 0
and optionally a secondary objective over the set of primary optima
(lexicographic optimisation).  Sized for occupancy-measure LPs of a few
dozen variables; no attempt is made at sparsity or warm starts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12
OPT_TOL = 1e-11
FEAS_TOL = 1e-9
MAX_PIVOTS = 10_000


class LPError(ValueError):
    """Infeasible or unbounded program (or a solver breakdown)."""


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    secondary: float | None
    basis: list
    pivots: int


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        self.A = A
        self.b = b
        self.basis = basis
        self.pivots = 0

    def pivot(self, row: int, col: int) -> None:
        p = self.A[row, col]
        self.A[row] /= p
        self.b[row] /= p
        for i in range(self.A.shape[0]):
            if i != row:
                f = self.A[i, col]
                if f != 0.0:
                    self.A[i] -= f * self.A[row]
                    self.b[i] -= f * self.b[row]
        self.A[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise LPError("pivot limit exceeded")

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        return c - c[self.basis] @ self.A

    def maximize(self, c: np.ndarray, allowed: np.ndarray) -> None:
        """Bland's-rule primal simplex restricted to ``allowed`` entering columns."""
        while True:
            d = self.reduced_costs(c)
            candidates = np.flatnonzero(allowed & (d > OPT_TOL))
            if candidates.size == 0:
                return
            col = int(candidates[0])
            column = self.A[:, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                raise LPError("objective is unbounded")
            ratios = np.maximum(self.b[rows], 0.0) / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            # Bland: among tied rows leave the smallest basic variable
            row = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(row, col)


def solve_lp(c, A_eq, b_eq, secondary=None) -> LPResult:
    """Maximize ``c.x`` over {A_eq x = b_eq, x >= 0}.

    If ``secondary`` is given, it is then maximized over the optimal face of
    the primary objective by continuing from the optimal tableau with entering
    columns restricted to zero primary reduced cost.
    """
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise LPError("dimension mismatch between c, A_eq and b_eq")
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase I: artificial columns n..n+m-1, maximize -sum(artificials)
    tab = _Tableau(np.hstack([A, np.eye(m)]), b.copy(), list(range(n, n + m)))
    c1 = np.concatenate([np.zeros(n), -np.ones(m)])
    tab.maximize(c1, np.ones(n + m, dtype=bool))
    infeas = float(np.sum(tab.b[[i for i, j in enumerate(tab.basis) if j >= n]]))
    if infeas > FEAS_TOL:
        raise LPError(f"program is infeasible (phase-one residual {infeas:.3g})")

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if tab.basis[i] >= n:
            cols = np.flatnonzero(np.abs(tab.A[i, :n]) > 1e-9)
            if cols.size:
                tab.pivot(i, int(cols[0]))
                keep.append(i)
        else:
            keep.append(i)
    tab = _Tableau(tab.A[keep][:, :n].copy(), tab.b[keep].copy(),
                   [tab.basis[i] for i in keep])
    tab.pivots = 0

    allowed = np.ones(n, dtype=bool)
    tab.maximize(c, allowed)
    sec_val = None
    if secondary is not None:
        c2 = np.asarray(secondary, dtype=float)
        d = tab.reduced_costs(c)
        scale = max(1.0, float(np.max(np.abs(c))))
        tab.maximize(c2, np.abs(d) <= 1e-9 * scale)
    x = np.zeros(n)
    x[tab.basis] = np.maximum(tab.b, 0.0)
    if secondary is not None:
        sec_val = float(c2 @ x)
    return LPResult(x, float(c @ x), sec_val, list(tab.basis), tab.pivots)
