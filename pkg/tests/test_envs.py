import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_fear.envs import (ACTIONS, THETA_LIMIT, AdventureSeeker, CartPole, StepResult,
                                 action_index, adventure_reset, adventure_step, cartpole_reset,
                                 cartpole_step, dump_trajectories, make_env)


class FixedRng:
    """Stands in for a Generator whose uniform draws all sit at quantile u."""

    def __init__(self, u: float):
        self.u = u

    def random(self, size=None):
        return self.u if size is None else np.full(size, self.u)

    def uniform(self, low=0.0, high=1.0, size=None):
        v = low + (high - low) * self.u
        return v if size is None else np.full(size, v)


class TestAdventureSeeker:
    def test_reset_minimum(self):
        assert adventure_reset(FixedRng(0.0)) == 0.25

    def test_reset_midpoint(self):
        assert adventure_reset(FixedRng(0.5)) == 0.5

    def test_reset_mean(self):
        rng = np.random.default_rng(0)
        draws = np.array([adventure_reset(rng) for _ in range(10_000)])
        assert abs(draws.mean() - 0.5) <= 0.01
        assert draws.min() >= 0.25 and draws.max() <= 0.75

    def test_step_up(self):
        r = adventure_step(0.50, +1, 0.0)
        assert r.next_state[0] == pytest.approx(0.51)
        assert r.reward == 0.50 and not r.terminal and not r.catastrophe

    def test_fall_right(self):
        r = adventure_step(0.995, +1, 0.01)
        assert r.next_state[0] == pytest.approx(1.015)
        assert r.catastrophe and r.terminal

    def test_fall_left(self):
        r = adventure_step(0.005, -1, 0.0)
        assert r.next_state[0] == pytest.approx(-0.005)
        assert r.catastrophe and r.terminal

    def test_invalid_action(self):
        with pytest.raises(ValueError):
            adventure_step(0.5, 0, 0.0)

    def test_cap_is_not_catastrophe(self):
        env = AdventureSeeker(np.random.default_rng(1), max_steps=3)
        env.reset()
        env.s = 0.5
        results = [env.step(+1 if i % 2 else -1) for i in range(3)]
        assert results[-1].terminal and not results[-1].catastrophe

    def test_step_before_reset(self):
        with pytest.raises(RuntimeError):
            AdventureSeeker(np.random.default_rng(0)).step(1)

    def test_same_seed_same_episode(self):
        def roll(seed):
            env = AdventureSeeker(np.random.default_rng(seed))
            out = [env.reset()[0]]
            for _ in range(50):
                r = env.step(1)
                out.append(r.next_state[0])
                if r.terminal:
                    break
            return out
        assert roll(3) == roll(3)


class TestCartPole:
    def test_reset_forced_zero(self):
        np.testing.assert_array_equal(cartpole_reset(FixedRng(0.5)), np.zeros(4))

    def test_reset_forced_max(self):
        np.testing.assert_allclose(cartpole_reset(FixedRng(1.0)), np.full(4, 0.05))

    def test_reset_range(self):
        rng = np.random.default_rng(0)
        S = np.array([cartpole_reset(rng) for _ in range(10_000)])
        assert np.all(np.abs(S) <= 0.05)

    def test_alternating_ten_steps(self):
        # frozen from tests/oracles/cartpole_ten_steps.py
        expected = [0.01959653261218256, 0.0017157551152658934,
                    -0.031131301387548854, -0.037866634333733384]
        s, total = np.zeros(4), 0.0
        for k in range(10):
            r = cartpole_step(s, 1 if k % 2 == 0 else -1, k)
            assert not r.terminal
            s, total = r.next_state, total + r.reward
        assert total == 10
        np.testing.assert_allclose(s, expected, rtol=0, atol=1e-12)

    def test_pole_past_limit(self):
        r = cartpole_step(np.array([0.0, 0.0, 0.21, 0.5]), 1)
        assert r.next_state[2] > THETA_LIMIT
        assert r.catastrophe and r.terminal and r.reward == 0.0

    def test_cart_out_of_track(self):
        r = cartpole_step(np.array([2.399, 1.0, 0.0, 0.0]), 1)
        assert r.catastrophe

    def test_theta_limit_is_twelve_degrees(self):
        assert THETA_LIMIT == pytest.approx(math.radians(12))

    def test_cap_after_200(self):
        r = cartpole_step(np.zeros(4), 1, t=199)
        assert r.terminal and not r.catastrophe and r.reward == 1.0

    def test_env_cap(self):
        env = CartPole(np.random.default_rng(0))
        env.reset()
        env.state = np.zeros(4)
        n, r = 0, None
        while True:
            # hand-made balancing: push toward the side the pole leans
            a = 1 if env.state[2] + 0.5 * env.state[3] > 0 else -1
            r = env.step(a)
            n += 1
            if r.terminal:
                break
        assert n == 200 and not r.catastrophe

    def test_non_finite_state(self):
        with pytest.raises(ValueError):
            cartpole_step(np.array([np.nan, 0, 0, 0]), 1)


def test_catastrophe_implies_terminal():
    with pytest.raises(ValueError):
        StepResult(np.zeros(1), 0.0, False, True)


def test_actions_and_index():
    assert ACTIONS == (-1, 1)
    assert [action_index(a) for a in ACTIONS] == [0, 1]


def test_make_env():
    assert make_env("cartpole", np.random.default_rng(0)).state_dim == 4
    assert make_env("adventure-seeker", np.random.default_rng(0)).state_dim == 1
    with pytest.raises(ValueError, match="unknown environment"):
        make_env("pong", np.random.default_rng(0))


def test_dump_trajectories(tmp_path):
    rows = [(1, 0, [0.5], 1, 0.5, False, False), (1, 1, [0.51], -1, 0.51, True, True)]
    dump_trajectories(tmp_path / "t.csv", rows)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["episode", "t", "s0"]
    assert len(lines) == 3


@settings(max_examples=200, deadline=None)
@given(s=st.floats(0.0, 1.0), a=st.sampled_from(ACTIONS), eta=st.floats(-0.05, 0.05))
def test_adventure_catastrophe_iff_outside(s, a, eta):
    r = adventure_step(s, a, eta)
    nxt = s + 0.01 * a + eta
    assert r.next_state[0] == nxt
    assert r.catastrophe == (nxt > 1.0 or nxt < 0.0)
    assert r.reward == s
