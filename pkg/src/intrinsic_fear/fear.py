"""The supervised fear model: probability that a state leads to catastrophe soon."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (LOGISTIC, AdamState, Gradients, MlpParams, adam_step, backward,
                       bce_with_logits, forward, forward_logits, init_params, load_params,
                       save_params)


@dataclass
class FearModel:
    params: MlpParams
    opt: AdamState

    @classmethod
    def create(cls, state_dim: int, hidden: int = 128, alpha: float = 1e-3,
               rng: np.random.Generator | None = None) -> "FearModel":
        params = init_params(state_dim, 1, hidden, head=LOGISTIC, rng=rng)
        return cls(params, AdamState.for_params(params, alpha=alpha))

    def save(self, path) -> None:
        save_params(self.params, path)

    @classmethod
    def load(cls, path, alpha: float = 1e-3) -> "FearModel":
        params = load_params(path)
        if params.head != LOGISTIC or params.n_out != 1:
            raise ValueError(f"{path} is not a fear-model snapshot")
        return cls(params, AdamState.for_params(params, alpha=alpha))


def fear_score(model: FearModel, s) -> np.ndarray | float:
    """F(s) in (0, 1); a batch of states gives a vector of scores."""
    out = forward(model.params, s)
    return float(out[0]) if np.ndim(s) == 1 else out[:, 0]


def batch_loss(params: MlpParams, X: np.ndarray, y: np.ndarray) -> tuple[float, Gradients]:
    """Mean binary cross-entropy over the batch and its parameter gradient."""
    z = forward_logits(params, X)[:, 0]
    loss, dz = bce_with_logits(z, y)
    n = len(y)
    grads = backward(params, X, (dz / n)[:, None])
    return float(loss.mean()), grads


def fear_train_step(model: FearModel, X, y) -> tuple[FearModel, float]:
    """One Adam step on the batch; returns the updated model and the pre-step loss."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("empty fear batch")
    loss, grads = batch_loss(model.params, X, y)
    opt, params = adam_step(model.opt, model.params, grads)
    return FearModel(params, opt), loss
