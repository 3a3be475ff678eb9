"""Adventure Seeker and Cart-Pole with catastrophe reported as a terminal flag.

Actions are the integers -1 and +1 in both tasks.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

ACTIONS = (-1, 1)


def action_index(a: int) -> int:
    return ACTIONS.index(a)


def _check_action(a) -> int:
    if a not in ACTIONS:
        raise ValueError(f"action must be -1 or +1, got {a!r}")
    return int(a)


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    terminal: bool
    catastrophe: bool

    def __post_init__(self):
        if self.catastrophe and not self.terminal:
            raise ValueError("a catastrophe must terminate the episode")


# ------------------------------------------------------------ Adventure Seeker

HILL_LOW, HILL_HIGH = 0.0, 1.0
START_LOW, START_HIGH = 0.25, 0.75
MOVE = 0.01
NOISE_SD = 0.01


def adventure_reset(rng: np.random.Generator) -> float:
    return START_LOW + (START_HIGH - START_LOW) * rng.random()


def adventure_step(s: float, a: int, noise: float) -> StepResult:
    """One transition given an already drawn noise sample ``noise``."""
    a = _check_action(a)
    nxt = s + MOVE * a + noise
    fell = nxt > HILL_HIGH or nxt < HILL_LOW
    return StepResult(np.array([nxt]), float(s), fell, fell)


class AdventureSeeker:
    """A player on a hill sloping up to the right; falling off either edge ends it."""

    name = "adventure-seeker"
    state_dim = 1
    n_actions = 2

    def __init__(self, rng: np.random.Generator, max_steps: int | None = 1000):
        self.rng = rng
        self.max_steps = max_steps
        self.s = None
        self.t = 0

    def reset(self) -> np.ndarray:
        self.s = adventure_reset(self.rng)
        self.t = 0
        return np.array([self.s])

    def step(self, a: int) -> StepResult:
        if self.s is None:
            raise RuntimeError("reset() must be called before step()")
        res = adventure_step(self.s, a, self.rng.normal(0.0, NOISE_SD))
        self.t += 1
        self.s = float(res.next_state[0])
        if not res.terminal and self.max_steps is not None and self.t >= self.max_steps:
            res.terminal = True
        if res.terminal:
            self.s = None
        return res


# ------------------------------------------------------------------ Cart-Pole

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12 * 2 * math.pi / 360
EPISODE_CAP = 200


def cartpole_reset(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.05, 0.05, size=4)


def cartpole_dynamics(state, a: int) -> np.ndarray:
    """Explicit Euler step of the frictionless cart-pole."""
    x, v, theta, omega = state
    force = FORCE_MAG * a
    cos, sin = math.cos(theta), math.sin(theta)
    temp = (force + POLE_MASS_LENGTH * omega * omega * sin) / TOTAL_MASS
    theta_acc = (GRAVITY * sin - cos * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS
    return np.array([x + TAU * v, v + TAU * x_acc,
                     theta + TAU * omega, omega + TAU * theta_acc])


def cartpole_step(state, a: int, t: int = 0) -> StepResult:
    """Advance one step; ``t`` is the number of steps already taken this episode."""
    a = _check_action(a)
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise ValueError("non-finite cart-pole state")
    nxt = cartpole_dynamics(state, a)
    failed = abs(nxt[0]) > X_LIMIT or abs(nxt[2]) > THETA_LIMIT
    if failed:
        return StepResult(nxt, 0.0, True, True)
    return StepResult(nxt, 1.0, t + 1 >= EPISODE_CAP, False)


class CartPole:
    name = "cartpole"
    state_dim = 4
    n_actions = 2

    def __init__(self, rng: np.random.Generator, max_steps: int = EPISODE_CAP):
        self.rng = rng
        self.max_steps = max_steps
        self.state = None
        self.t = 0

    def reset(self) -> np.ndarray:
        self.state = cartpole_reset(self.rng)
        self.t = 0
        return self.state.copy()

    def step(self, a: int) -> StepResult:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        res = cartpole_step(self.state, a, 0)
        self.t += 1
        if not res.terminal and self.t >= self.max_steps:
            res.terminal = True
        self.state = None if res.terminal else res.next_state.copy()
        return res


ENVIRONMENTS = {AdventureSeeker.name: AdventureSeeker, CartPole.name: CartPole}


def make_env(name: str, rng: np.random.Generator, **kwargs):
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(rng, **kwargs)


def dump_trajectories(path, rows) -> None:
    """Write (episode, t, state, action, reward, terminal, catastrophe) rows as CSV."""
    rows = list(rows)
    dim = len(rows[0][2]) if rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "t", *[f"s{i}" for i in range(dim)],
                    "action", "reward", "terminal", "catastrophe"])
        for ep, t, s, a, r, term, cat in rows:
            w.writerow([ep, t, *(repr(float(v)) for v in s), a, repr(float(r)), int(term), int(cat)])
