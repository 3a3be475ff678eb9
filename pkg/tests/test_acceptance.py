"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The behavioural criteria (5 and 6) train 20 agents in total and take tens
of minutes on one core; select the others with ``-k "not behaviour"``.
"""
import time

import numpy as np
import pytest

from intrinsic_fear.agent import AgentConfig, q_batch_loss, train
from intrinsic_fear.fear import FearModel, batch_loss
from intrinsic_fear.harness import ExperimentConfig, run
from intrinsic_fear.harness.config import ENV_DEFAULTS
from intrinsic_fear.numerics import IDENTITY, LOGISTIC, backward, forward_logits, init_params
from intrinsic_fear.seeding import derive_rng
from intrinsic_fear.theory import (average_return, corrupt_lookup, hoeffding_radius,
                                   occupancy_lp, random_mdp, stationary_distribution,
                                   verify_theorem2)

from conftest import numeric_grad, rel_error

SEEDS = [0, 1, 2, 3, 4]


@pytest.fixture
def report(capsys):
    def emit(criterion: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return emit


def test_criterion_1_theorem1_chain(tmp_path, report):
    t0 = time.perf_counter()
    res = run(ExperimentConfig(mode="theorem1", instances=200, max_states=6, max_actions=3,
                               lambdas=(0.1, 1.0, 10.0), out=str(tmp_path)))
    elapsed = time.perf_counter() - t0
    ok = res.passed and elapsed < 120
    report(1, ok, f"{200 - res.failures}/200 chains hold at slack >= -1e-8, {elapsed:.1f}s")
    assert res.passed
    assert elapsed < 120


def test_criterion_2_occupancy_lp_oracle(report):
    t0 = time.perf_counter()
    rng = derive_rng(2, "acceptance-lp")
    worst_gap, violations, done = 0.0, 0, 0
    while done < 100:
        S, A = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        mdp = random_mdp(rng, S, A)
        try:
            stationary_distribution(mdp, np.zeros(S, dtype=int))
        except ValueError:
            continue  # not unichain
        res = occupancy_lp(mdp)
        worst_gap = max(worst_gap, abs(res.eta - average_return(mdp, res.policy)))
        for _ in range(200):
            pi = rng.dirichlet(np.ones(A), size=S)
            violations += average_return(mdp, pi) > res.eta + 1e-9
        done += 1
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and violations == 0 and elapsed < 60
    report(2, ok, f"max |eta_LP - eta(pi)| = {worst_gap:.2e}, dominance violations {violations}/20000, "
                  f"{elapsed:.1f}s")
    assert worst_gap <= 1e-6
    assert violations == 0
    assert elapsed < 60


def test_criterion_3_theorem2_decomposition(report):
    t0 = time.perf_counter()
    rng = derive_rng(3, "acceptance-theorem2")
    gamma = 0.9
    min_L, worst_t1, worst_cls = np.inf, -np.inf, -np.inf
    for _ in range(100):
        mdp = random_mdp(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
        F = mdp.danger.astype(float)
        Fh = corrupt_lookup(F, "flip", 0.2, rng)
        lam = float(rng.choice([0.1, 1.0, 10.0]))
        for gp in (0.5 * gamma, 0.9 * gamma, gamma):
            q = verify_theorem2(mdp, F, Fh, gamma, gp, lam).quantities
            delta = q["max_abs_F_minus_Fhat"]
            min_L = min(min_L, q["L"])
            worst_t1 = max(worst_t1, q["term1_max"] - (gamma - gp) / ((1 - gp) * (1 - gamma)))
            worst_cls = max(worst_cls, q["classifier_term_max"] - 2 * lam * delta / (1 - gp))
    elapsed = time.perf_counter() - t0
    ok = min_L >= -1e-9 and worst_t1 <= 1e-8 and worst_cls <= 1e-8 and elapsed < 120
    report(3, ok, f"min L {min_L:.2e}, first-term excess {worst_t1:.2e}, classifier-term excess "
                  f"{worst_cls:.2e}, {elapsed:.1f}s")
    assert min_L >= -1e-9
    assert worst_t1 <= 1e-8
    assert worst_cls <= 1e-8
    assert elapsed < 120


def test_criterion_4_lookup_consistency(report):
    rng = derive_rng(4, "acceptance-hoeffding")
    f_det = (rng.random(50) < 0.5).astype(float)
    exact = np.array_equal(corrupt_lookup(f_det, "estimate", 1, rng), f_det)
    delta = 0.05
    f = np.array([0.05, 0.3, 0.5, 0.8])
    rates = {}
    for n in (10, 100, 1000):
        radius = hoeffding_radius(n, n, delta)
        hits = 0
        for _ in range(1000):
            est = corrupt_lookup(f, "estimate", n, rng)
            hits += bool(np.all(np.abs(est - f) <= radius))
        rates[n] = hits / 1000
    ok = exact and all(r >= 1 - delta for r in rates.values())
    report(4, ok, f"deterministic exact={exact}, coverage " +
           ", ".join(f"N(s)={n}: {r:.3f}" for n, r in rates.items()))
    assert exact
    assert all(r >= 1 - delta for r in rates.values())


def _runs(env: str, episodes: int):
    out = {}
    for seed in SEEDS:
        kw = dict(ENV_DEFAULTS[env], max_episodes=episodes, total_steps=10**8, seed=seed)
        out[seed] = (train(env, AgentConfig.baseline(**kw)), train(env, AgentConfig(**kw)))
    return out


@pytest.mark.behaviour
def test_criterion_5_behaviour_adventure_seeker(report):
    t0 = time.perf_counter()
    runs = _runs("adventure-seeker", 300)
    if_clean = [int(np.sum(m_if.catastrophes[99:300])) for _, m_if in runs.values()]
    base_late = [int(np.sum(m_b.catastrophes[-100:])) for m_b, _ in runs.values()]
    n_if = sum(c == 0 for c in if_clean)
    n_base = sum(c >= 1 for c in base_late)
    ok = n_if >= 3 and n_base >= 3
    report(5, ok, f"IF catastrophes in episodes 100-300 per seed {if_clean} ({n_if}/5 clean); "
                  f"baseline catastrophes in final 100 per seed {base_late} ({n_base}/5 nonzero); "
                  f"{time.perf_counter() - t0:.0f}s")
    assert n_if >= 3
    assert n_base >= 3


@pytest.mark.behaviour
def test_criterion_6_behaviour_cartpole(report):
    t0 = time.perf_counter()
    runs = _runs("cartpole", 500)
    base = [float(np.mean(m_b.lengths[-50:])) for m_b, _ in runs.values()]
    fear = [float(np.mean(m_if.lengths[-50:])) for _, m_if in runs.values()]
    wins = sum(f >= b for f, b in zip(fear, base))
    report(6, wins >= 3, f"final-50 mean length IF {[round(v, 1) for v in fear]} vs baseline "
                         f"{[round(v, 1) for v in base]}; IF >= baseline in {wins}/5 seeds; "
                         f"{time.perf_counter() - t0:.0f}s")
    assert wins >= 3


def test_criterion_7_gradient_hygiene(report):
    rng = derive_rng(7, "acceptance-gradients")
    worst = {"numerics": 0.0, "fear": 0.0, "agent": 0.0}
    for k in range(100):
        n_in, n_out, hid = (int(v) for v in rng.integers(1, 5, size=3))
        p = init_params(n_in, n_out, hidden=hid, head=IDENTITY if k % 2 else LOGISTIC, rng=rng)
        X, U = rng.normal(size=(4, n_in)), rng.normal(size=(4, n_out))
        num = numeric_grad(lambda q: float(np.sum(U * forward_logits(q, X))), p)
        worst["numerics"] = max(worst["numerics"], rel_error(backward(p, X, U).flat(), num))

        model = FearModel.create(n_in, hidden=hid, rng=rng)
        y = rng.integers(0, 2, size=4).astype(float)
        _, g = batch_loss(model.params, X, y)
        num = numeric_grad(lambda q: batch_loss(q, X, y)[0], model.params)
        worst["fear"] = max(worst["fear"], rel_error(g.flat(), num))

        q = init_params(n_in, 2, hidden=hid, rng=rng)
        a, t = rng.integers(0, 2, size=4), rng.normal(size=4)
        _, g = q_batch_loss(q, X, a, t)
        num = numeric_grad(lambda w: q_batch_loss(w, X, a, t)[0], q)
        worst["agent"] = max(worst["agent"], rel_error(g.flat(), num))
    ok = all(v < 1e-4 for v in worst.values())
    report(7, ok, "max relative error over 100 instances each: " +
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok
