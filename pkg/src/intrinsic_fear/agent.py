"""DQN with intrinsic fear: epsilon-greedy acting, fear-penalised targets, co-training."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .envs import ACTIONS, make_env
from .fear import FearModel, fear_score, fear_train_step
from .memory import FearBuffers, ReplayBuffer, Transition, sample_fear_batch
from .numerics import (AdamState, Gradients, MlpParams, adam_step, backward, forward,
                       init_params)
from .seeding import derive_rng

log = logging.getLogger(__name__)

METRICS_HEADER = ["episode", "steps", "return", "catastrophe",
                  "mean_q_loss", "mean_fear_loss", "mean_fear_score"]


@dataclass
class AgentConfig:
    gamma: float = 0.99
    lam: float = 40.0            # fear factor
    k_r: int = 5                 # fear radius
    k_lambda: int = 1000         # phase-in length in steps
    train_fear: bool = True
    discount_in_target: bool = True
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int | None = None   # None: 10% of total_steps
    batch_size: int = 32
    fear_batch_size: int = 32
    hidden: int = 128
    q_lr: float = 1e-3
    fear_lr: float = 1e-3
    replay_capacity: int = 100_000
    fear_capacity: int = 10_000
    total_steps: int = 300_000
    max_episodes: int | None = None
    env_max_steps: int | None = None     # None: environment default
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.lam < 0:
            raise ValueError("fear factor must be non-negative")
        if self.k_r < 0 or self.k_lambda <= 0:
            raise ValueError("fear radius must be >= 0 and phase-in length > 0")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.batch_size <= 0 or self.fear_batch_size <= 0 or self.hidden <= 0:
            raise ValueError("batch sizes and hidden width must be positive")
        if self.total_steps <= 0:
            raise ValueError("total_steps must be positive")

    @classmethod
    def baseline(cls, **kw) -> "AgentConfig":
        """Plain DQN: no fear penalty and no fear-model training."""
        kw.update(lam=0.0, train_fear=False)
        return cls(**kw)

    def epsilon_at(self, t: int) -> float:
        decay = self.eps_decay_steps if self.eps_decay_steps is not None else max(1, self.total_steps // 10)
        frac = min(1.0, t / decay)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class TrainMetrics:
    returns: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    catastrophes: list = field(default_factory=list)
    q_loss: list = field(default_factory=list)
    fear_loss: list = field(default_factory=list)
    fear_score: list = field(default_factory=list)
    steps: int = 0
    q_params: MlpParams | None = field(default=None, repr=False, compare=False)
    fear_model: FearModel | None = field(default=None, repr=False, compare=False)

    @property
    def n_episodes(self) -> int:
        return len(self.returns)

    def rows(self):
        for i in range(self.n_episodes):
            yield [i + 1, self.lengths[i], self.returns[i], int(self.catastrophes[i]),
                   self.q_loss[i], self.fear_loss[i], self.fear_score[i]]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for row in self.rows():
                w.writerow([row[0], row[1], repr(float(row[2])), row[3],
                            *(repr(float(v)) for v in row[4:])])


def fear_factor_at(t, lam: float, k_lambda: float) -> float:
    if k_lambda <= 0:
        raise ValueError("phase-in length must be positive")
    return min(lam, lam * t / k_lambda)


def greedy_index(qvals) -> int:
    # np.argmax returns the first maximum: ties go to the lowest index
    return int(np.argmax(qvals))


def select_action(q: MlpParams, s, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action in {-1, +1}."""
    if rng.random() < epsilon:
        return ACTIONS[int(rng.integers(len(ACTIONS)))]
    return ACTIONS[greedy_index(forward(q, s))]


def compute_targets(r, s_next, terminal, catastrophe, q: MlpParams, fear: FearModel | None,
                    lam_t: float, gamma: float, discount_in_target: bool = True):
    """Vectorised intrinsic-fear targets.

    Catastrophic terminals get ``r - lam_t``.  Non-catastrophic terminals are
    episode-length cutoffs and bootstrap like ordinary transitions.  Returns
    the targets and the fear scores of the successor states.
    """
    r = np.asarray(r, dtype=float)
    catastrophe = np.asarray(catastrophe, dtype=bool)
    disc = gamma if discount_in_target else 1.0
    boot = r + disc * forward(q, s_next).max(axis=1)
    if fear is not None and lam_t > 0:
        f = fear_score(fear, s_next)
    else:
        f = np.zeros_like(r)
    y = np.where(catastrophe, r - lam_t, boot - lam_t * f)
    return y, f


def compute_target(tr: Transition, q: MlpParams, fear: FearModel | None, lam_t: float,
                   gamma: float, discount_in_target: bool = True) -> float:
    y, _ = compute_targets([tr.r], np.atleast_2d(tr.s_next), [tr.terminal], [tr.catastrophe],
                           q, fear, lam_t, gamma, discount_in_target)
    return float(y[0])


def q_batch_loss(q: MlpParams, s, a_idx, y) -> tuple[float, Gradients]:
    """Mean squared Bellman error with the targets held constant."""
    out = forward(q, s)
    n = len(y)
    rows = np.arange(n)
    diff = out[rows, a_idx] - y
    up = np.zeros_like(out)
    up[rows, a_idx] = 2.0 * diff / n
    return float(np.mean(diff * diff)), backward(q, s, up)


def dqn_update(q: MlpParams, opt: AdamState, batch, fear: FearModel | None, lam_t: float,
               gamma: float, discount_in_target: bool = True):
    """One Adam step on a batch of transitions (list or column arrays)."""
    s, a_idx, r, s_next, terminal, catastrophe = _columns(batch)
    y, _ = compute_targets(r, s_next, terminal, catastrophe, q, fear, lam_t, gamma,
                           discount_in_target)
    loss, grads = q_batch_loss(q, s, a_idx, y)
    opt, q = adam_step(opt, q, grads)
    return q, opt, loss


def _columns(batch):
    if isinstance(batch, tuple):
        return batch
    if not batch:
        raise ValueError("empty batch")
    return (np.array([t.s for t in batch], dtype=float),
            np.array([ACTIONS.index(t.a) for t in batch]),
            np.array([t.r for t in batch], dtype=float),
            np.array([t.s_next for t in batch], dtype=float),
            np.array([t.terminal for t in batch]),
            np.array([t.catastrophe for t in batch]))


def train(env, config: AgentConfig) -> TrainMetrics:
    """Run the interleaved act/store/label/update loop.

    ``env`` is an environment instance or an environment identifier; in the
    latter case it is built with a noise stream derived from the seed.
    """
    cfg = config
    if isinstance(env, str):
        kw = {} if cfg.env_max_steps is None else {"max_steps": cfg.env_max_steps}
        env = make_env(env, derive_rng(cfg.seed, "env"), **kw)
    explore_rng = derive_rng(cfg.seed, "explore")
    sample_rng = derive_rng(cfg.seed, "sample")
    init_rng = derive_rng(cfg.seed, "init")

    dim, n_act = env.state_dim, env.n_actions
    q = init_params(dim, n_act, cfg.hidden, rng=init_rng)
    opt = AdamState.for_params(q, alpha=cfg.q_lr)
    fear = FearModel.create(dim, cfg.hidden, alpha=cfg.fear_lr, rng=init_rng) if cfg.train_fear else None
    replay = ReplayBuffer(cfg.replay_capacity, dim)
    fear_buf = FearBuffers(dim, cfg.fear_capacity)
    metrics = TrainMetrics()

    t = 0
    while t < cfg.total_steps and (cfg.max_episodes is None or metrics.n_episodes < cfg.max_episodes):
        s = env.reset()
        visited = []
        ep_ret = 0.0
        q_losses, f_losses, f_scores = [], [], []
        done = catastrophe = False
        while not done and t < cfg.total_steps:
            eps = cfg.epsilon_at(t)
            if explore_rng.random() < eps:
                a_idx = int(explore_rng.integers(n_act))
            else:
                a_idx = greedy_index(forward(q, s))
            res = env.step(ACTIONS[a_idx])
            t += 1
            visited.append(s)
            replay.push(Transition(s, ACTIONS[a_idx], res.reward, res.next_state, res.terminal, res.catastrophe))
            ep_ret += res.reward
            done, catastrophe = res.terminal, res.catastrophe
            if done and fear is not None:
                fear_buf.add_episode(visited, catastrophe, cfg.k_r)

            if len(replay) >= cfg.batch_size:
                lam_t = fear_factor_at(t, cfg.lam, cfg.k_lambda)
                cols = replay.sample_arrays(cfg.batch_size, sample_rng)
                y, f = compute_targets(cols[2], cols[3], cols[4], cols[5], q, fear, lam_t,
                                       cfg.gamma, cfg.discount_in_target)
                loss, grads = q_batch_loss(q, cols[0], cols[1], y)
                opt, q = adam_step(opt, q, grads)
                q_losses.append(loss)
                f_scores.append(float(f.mean()))
            if fear is not None:
                fb = sample_fear_batch(fear_buf, cfg.fear_batch_size, sample_rng)
                if fb is not None:
                    fear, fl = fear_train_step(fear, *fb)
                    f_losses.append(fl)
            s = res.next_state

        if not done:
            break  # step budget hit mid-episode; partial episodes are not reported
        metrics.returns.append(ep_ret)
        metrics.lengths.append(len(visited))
        metrics.catastrophes.append(bool(catastrophe))
        metrics.q_loss.append(float(np.mean(q_losses)) if q_losses else 0.0)
        metrics.fear_loss.append(float(np.mean(f_losses)) if f_losses else 0.0)
        metrics.fear_score.append(float(np.mean(f_scores)) if f_scores else 0.0)
        log.debug("episode %d len=%d return=%.3f catastrophe=%s", metrics.n_episodes,
                  len(visited), ep_ret, catastrophe)
    metrics.steps = t
    metrics.q_params, metrics.fear_model = q, fear
    return metrics


def config_dict(cfg: AgentConfig) -> dict:
    return asdict(cfg)
