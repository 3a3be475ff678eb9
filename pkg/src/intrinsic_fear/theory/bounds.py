"""Exact checks of the intrinsic-fear return bounds on tabular MDPs."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .mdp import MdpError, TabularMdp
from .solvers import (average_return, chain_stationary, discounted_visitation, induced_chain,
                      occupancy_lp, policy_evaluation, value_iteration)

CHECK_TOL = 1e-8


@dataclass
class Inequality:
    name: str
    lhs: float
    rhs: float
    tol: float = CHECK_TOL

    @property
    def slack(self) -> float:
        """rhs - lhs for a claim of the form lhs <= rhs."""
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol


@dataclass
class BoundReport:
    kind: str
    quantities: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, lhs: float, rhs: float, tol: float = CHECK_TOL) -> None:
        self.checks.append(Inequality(name, float(lhs), float(rhs), tol))

    def check(self, name: str) -> Inequality:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"{self.kind}: {'PASS' if self.passed else 'FAIL'}"]
        for k, v in self.quantities.items():
            lines.append(f"  {k} = {v:.12g}")
        for c in self.checks:
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: "
                         f"{c.lhs:.12g} <= {c.rhs:.12g} (slack {c.slack:.3g})")
        return "\n".join(lines)

    def csv_rows(self):
        for c in self.checks:
            yield [c.name, repr(c.lhs), repr(c.rhs), repr(c.slack), int(c.passed)]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "lhs", "rhs", "slack", "pass"])
        w.writerows(self.csv_rows())
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(buf.getvalue())
        return buf.getvalue()


def as_lookup(f, n_states: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (n_states,):
        raise MdpError(f"lookup fear must have {n_states} entries, got {f.shape}")
    if np.any(f < 0.0) or np.any(f > 1.0):
        raise MdpError("lookup fear values must lie in [0, 1]")
    return f


def shape_with_fear(mdp: TabularMdp, fear, lam: float, reward_range: float = 1.0) -> TabularMdp:
    """R'(s, a) = R(s, a) - lam * reward_range * f(s); dynamics untouched."""
    if lam < 0:
        raise MdpError("fear factor must be non-negative")
    f = as_lookup(fear, mdp.n_states)
    if lam == 0:
        return mdp.with_rewards(mdp.R.copy(), shaped=mdp.shaped)
    return mdp.with_rewards(mdp.R - lam * reward_range * f[:, None], shaped=True)


def verify_theorem1(mdp: TabularMdp, lam: float, gamma: float | None = None, start=None,
                    scale_by_range: bool = False, tol: float = CHECK_TOL) -> BoundReport:
    """Evaluate  eta(pi*) >= eta(pi~) >= eta_F(pi~) >= eta(pi*) - lam*eps.

    pi* is the danger-minimising optimum of ``mdp`` and pi~ the optimum of the
    MDP shaped with the danger indicator.  ``gamma`` < 1 switches from average
    reward to the normalised discounted return.
    """
    if mdp.R.min() < 0 or mdp.R.max() > 1:
        raise MdpError("rewards must lie in [0, 1]")
    rng_ = float(mdp.R.max() - mdp.R.min()) if scale_by_range else 1.0
    fear = mdp.danger.astype(float)
    shaped = shape_with_fear(mdp, fear, lam, rng_)

    opt = occupancy_lp(mdp, gamma, start)
    eps = opt.danger_mass
    tilde = occupancy_lp(shaped, gamma, start)

    eta_star = average_return(mdp, opt.policy, gamma, start)
    eta_tilde = average_return(mdp, tilde.policy, gamma, start)
    eta_f_tilde = average_return(shaped, tilde.policy, gamma, start)
    floor = eta_star - lam * rng_ * eps

    rep = BoundReport("theorem1")
    rep.quantities.update({
        "eta_M(pi*)": eta_star, "eta_M(pi~)": eta_tilde, "eta_MF(pi~)": eta_f_tilde,
        "eta_M(pi*) - lam*eps": floor, "eps": eps, "lambda": lam,
        "lp_eta_star": opt.eta, "lp_eta_shaped": tilde.eta,
    })
    rep.add("eta_M(pi~) <= eta_M(pi*)", eta_tilde, eta_star, tol)
    rep.add("eta_MF(pi~) <= eta_M(pi~)", eta_f_tilde, eta_tilde, tol)
    rep.add("eta_M(pi*) - lam*eps <= eta_MF(pi~)", floor, eta_f_tilde, tol)
    return rep


def corrupt_lookup(fear, mode: str, param, rng: np.random.Generator) -> np.ndarray:
    """Imperfect copy of a lookup fear model.

    ``flip``: each (binary) entry flipped with probability ``param``.
    ``estimate``: each entry replaced by the mean of ``param`` Bernoulli(f(s))
    draws; ``param`` may be a scalar or a per-state visit count.
    """
    f = np.asarray(fear, dtype=float)
    if np.any(f < 0) or np.any(f > 1):
        raise MdpError("lookup fear values must lie in [0, 1]")
    if mode == "flip":
        if not 0.0 <= param <= 1.0:
            raise ValueError("flip probability must lie in [0, 1]")
        if not np.all((f == 0.0) | (f == 1.0)):
            raise ValueError("flip mode needs a binary lookup table")
        flips = rng.random(f.shape) < param
        return np.where(flips, 1.0 - f, f)
    if mode == "estimate":
        n = np.broadcast_to(np.asarray(param), f.shape)
        if np.any(n < 1) or not np.all(n == np.floor(n)):
            raise ValueError("visit counts must be positive integers")
        n = n.astype(np.int64)
        return rng.binomial(n, f) / n
    raise ValueError(f"unknown corruption mode {mode!r}; expected 'flip' or 'estimate'")


def hoeffding_radius(n_visits, total_steps, delta: float) -> np.ndarray:
    """sqrt(log(N / delta) / N(s))."""
    return np.sqrt(np.log(np.asarray(total_steps, dtype=float) / delta) / np.asarray(n_visits, dtype=float))


def _normalizer(lam: float, rmin: float = 0.0, rmax: float = 1.0):
    """Affine map taking fear-shaped rewards into [0, 1], and the matching lambda'.

    Uses the nominal reward range, not the range observed in one instance.
    """
    lo = rmin - lam * (rmax - rmin)
    scale = (rmax - rmin) * (1.0 + lam)
    return (lambda R: (R - lo) / scale), lam / (1.0 + lam)


def verify_theorem2(mdp: TabularMdp, fear, fear_hat, gamma: float, gamma_plan: float, lam: float,
                    start_dist=None, normalize: bool = False, tol: float = CHECK_TOL) -> BoundReport:
    """Measure the return lost by planning with (fear_hat, gamma_plan) instead of (fear, gamma).

    The loss L weights V*_{F,gamma} - V^{pi_hat}_{F,gamma} by the state
    distribution of pi_hat (stationary, or discounted visitation from
    ``start_dist``) with prefactor (1 - gamma).  ``normalize`` rescales the
    shaped rewards into [0, 1] and uses lambda' = lambda / (1 + lambda).
    """
    if not 0.0 <= gamma_plan <= gamma < 1.0:
        raise MdpError(f"need 0 <= gamma_plan <= gamma < 1, got {gamma_plan}, {gamma}")
    S = mdp.n_states
    F = as_lookup(fear, S)
    Fh = as_lookup(fear_hat, S)
    env_F = shape_with_fear(mdp, F, lam)
    env_Fh = shape_with_fear(mdp, Fh, lam)
    lam_eff = lam
    if normalize:
        norm, lam_eff = _normalizer(lam)
        env_F = env_F.with_rewards(norm(env_F.R))
        env_Fh = env_Fh.with_rewards(norm(env_Fh.R))

    _, pi_opt = value_iteration(env_F, gamma)              # pi*_{F, gamma}
    _, pi_hat = value_iteration(env_Fh, gamma_plan)        # pi*_{F^, gamma_plan}
    _, pi_opt_plan = value_iteration(env_F, gamma_plan)    # pi*_{F, gamma_plan}

    V_opt = policy_evaluation(env_F, pi_opt, gamma)
    V_hat = policy_evaluation(env_F, pi_hat, gamma)
    if start_dist is None:
        P, _ = induced_chain(mdp, pi_hat)
        omega = chain_stationary(P)
    else:
        omega = discounted_visitation(mdp, pi_hat, gamma, start_dist)
    gap = V_opt - V_hat
    L = (1.0 - gamma) * float(omega @ gap)

    # first summand: same policy, two discounts
    term1 = V_opt - policy_evaluation(env_F, pi_opt, gamma_plan)
    b1 = (gamma - gamma_plan) / ((1.0 - gamma_plan) * (1.0 - gamma))
    # classifier summand at the planning discount
    V_plan_opt = policy_evaluation(env_F, pi_opt_plan, gamma_plan)
    V_plan_hat = policy_evaluation(env_F, pi_hat, gamma_plan)
    classifier = V_plan_opt - V_plan_hat
    delta = float(np.max(np.abs(F - Fh)))
    dev = max(float(np.max(np.abs(policy_evaluation(env_Fh, p, gamma_plan)
                                  - policy_evaluation(env_F, p, gamma_plan))))
              for p in (pi_opt_plan, pi_hat))
    b2 = lam_eff * delta / (1.0 - gamma_plan)
    # raw rewards span [-lam, 1]; rescaling into [0, 1] multiplies differences by 1/(1+lam)
    range_factor = 1.0 if normalize else 1.0 + lam

    rep = BoundReport("theorem2")
    rep.quantities.update({
        "L": L,
        "L_plan_prefactor": (1.0 - gamma_plan) * float(omega @ gap),
        "max_gap": float(np.max(gap)),
        "term1_max": float(np.max(term1)),
        "term1_bound": b1,
        "classifier_term_max": float(np.max(classifier)),
        "value_deviation": dev,
        "max_abs_F_minus_Fhat": delta,
        "lambda_used": lam_eff,
        "gamma": gamma, "gamma_plan": gamma_plan,
    })
    rep.add("L >= 0", 0.0, L, tol)
    rep.add("first term <= (g - gp)/((1 - gp)(1 - g))", float(np.max(term1)), b1, tol)
    rep.add("value deviation <= lam*max|F - F^|/(1 - gp)", dev, b2, tol)
    rep.add("classifier term <= 2 lam*max|F - F^|/(1 - gp)", float(np.max(classifier)), 2 * b2, tol)
    rep.add("L <= (1 - g)[first-term bound + classifier bound]", L,
            (1.0 - gamma) * (range_factor * b1 + 2 * b2), tol)
    if normalize:
        second = policy_evaluation(env_F, pi_opt, gamma_plan) - V_hat
        rep.add("second term <= classifier term", float(np.max(second - classifier)), 0.0, tol)
    return rep


def sweep_gamma_plan(mdp: TabularMdp, fear, fear_hat, gamma: float, lam: float, grid,
                     start_dist=None, normalize: bool = False, tie_tol: float = 1e-12):
    """Measured L over a grid of planning discounts; returns (argmin, [(gp, L), ...]).

    Ties go to the larger planning discount.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty gamma_plan grid")
    if grid[0] < 0 or grid[-1] > gamma:
        raise ValueError("grid must lie within [0, gamma]")
    curve = [(gp, verify_theorem2(mdp, fear, fear_hat, gamma, gp, lam, start_dist,
                                  normalize).quantities["L"]) for gp in grid]
    best = min(L for _, L in curve)
    gamma_star = max(gp for gp, L in curve if L <= best + tie_tol)
    return gamma_star, curve
