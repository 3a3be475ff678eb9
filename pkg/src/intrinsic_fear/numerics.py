"""One-hidden-layer perceptron with analytic gradients, Adam, and the two losses.

Both the Q-network and the fear network are instances of :class:`MlpParams`;
they differ only in the output head (identity vs. logistic).  All functions
accept either a single input vector or a batch stacked along axis 0.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

IDENTITY = "identity"
LOGISTIC = "logistic"
_HEAD_CODES = {IDENTITY: 0, LOGISTIC: 1}

MAGIC = b"IFMLP1"
PROB_CLAMP = 1e-7


class ShapeError(ValueError):
    """Raised when array dimensions do not line up."""


@dataclass
class MlpParams:
    w1: np.ndarray  # [hidden, in]
    b1: np.ndarray  # [hidden]
    w2: np.ndarray  # [out, hidden]
    b2: np.ndarray  # [out]
    head: str = IDENTITY

    def __post_init__(self):
        if self.head not in _HEAD_CODES:
            raise ShapeError(f"unknown output head {self.head!r}")
        h, i = self.w1.shape
        o, h2 = self.w2.shape
        if h2 != h or self.b1.shape != (h,) or self.b2.shape != (o,):
            raise ShapeError(
                f"inconsistent shapes w1={self.w1.shape} b1={self.b1.shape} "
                f"w2={self.w2.shape} b2={self.b2.shape}")

    @property
    def n_in(self) -> int:
        return self.w1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def n_out(self) -> int:
        return self.w2.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()), head=self.head)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        parts, k = [], 0
        for a in self.arrays():
            parts.append(vec[k:k + a.size].reshape(a.shape))
            k += a.size
        return MlpParams(*parts, head=self.head)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


# Gradients share the parameter layout; the head tag is irrelevant for them.
Gradients = MlpParams


def init_params(n_in: int, n_out: int, hidden: int = 128, head: str = IDENTITY,
                rng: np.random.Generator | None = None) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""
    rng = np.random.default_rng() if rng is None else rng
    k1 = 1.0 / np.sqrt(n_in)
    k2 = 1.0 / np.sqrt(hidden)
    return MlpParams(
        w1=rng.uniform(-k1, k1, size=(hidden, n_in)),
        b1=rng.uniform(-k1, k1, size=hidden),
        w2=rng.uniform(-k2, k2, size=(n_out, hidden)),
        b2=rng.uniform(-k2, k2, size=n_out),
        head=head,
    )


def zero_params(n_in: int, n_out: int, hidden: int = 128, head: str = IDENTITY) -> MlpParams:
    return MlpParams(np.zeros((hidden, n_in)), np.zeros(hidden),
                     np.zeros((n_out, hidden)), np.zeros(n_out), head=head)


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.n_in:
        raise ShapeError(f"input shape {x.shape} does not match input width {params.n_in}")
    return X, single


def forward_logits(params: MlpParams, x) -> np.ndarray:
    """Pre-head output (the logit for a logistic head)."""
    X, single = _as_batch(params, x)
    H = np.dot(X, params.w1.T)
    H += params.b1
    np.maximum(H, 0.0, out=H)
    Z = np.dot(H, params.w2.T)
    Z += params.b2
    return Z[0] if single else Z


def forward(params: MlpParams, x) -> np.ndarray:
    z = forward_logits(params, x)
    return sigmoid(z) if params.head == LOGISTIC else z


def backward(params: MlpParams, x, upstream) -> Gradients:
    """Gradient of ``sum(upstream * output)`` w.r.t. every parameter.

    For a logistic head, ``upstream`` is taken with respect to the *logit*;
    this is what the fused cross-entropy needs and avoids dividing by
    p(1-p) near saturation.
    """
    X, single = _as_batch(params, x)
    G = np.asarray(upstream, dtype=float)
    G = G[None, :] if single else G
    if G.shape != (X.shape[0], params.n_out):
        raise ShapeError(f"upstream shape {np.shape(upstream)} does not match output width {params.n_out}")
    pre = np.dot(X, params.w1.T)
    pre += params.b1
    H = np.maximum(pre, 0.0)
    gw2 = np.dot(G.T, H)
    gb2 = G.sum(axis=0)
    dH = np.dot(G, params.w2)
    dH *= pre > 0
    gw1 = np.dot(dH.T, X)
    gb1 = dH.sum(axis=0)
    return Gradients(gw1, gb1, gw2, gb2, head=params.head)


@dataclass
class AdamState:
    """Adam moments over the flattened parameter vector (layout of ``MlpParams.flat``)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, alpha: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if alpha <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1) or eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        n = sum(a.size for a in params.arrays())
        return cls(np.zeros(n), np.zeros(n), 0, alpha, beta1, beta2, eps)


def adam_step(state: AdamState, params: MlpParams, grads: Gradients) -> tuple[AdamState, MlpParams]:
    """Bias-corrected Adam update. Inputs are not mutated."""
    for p, g in zip(params.arrays(), grads.arrays()):
        if p.shape != g.shape:
            raise ShapeError(f"shape mismatch in adam_step: {p.shape} vs {g.shape}")
    g = grads.flat()
    if g.shape != state.m.shape:
        raise ShapeError(f"optimizer state has {state.m.size} entries, parameters {g.size}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * (g * g)
    step = state.alpha * (m / (1.0 - b1 ** t)) / (np.sqrt(v / (1.0 - b2 ** t)) + state.eps)
    return replace(state, m=m, v=v, t=t), params.with_flat(params.flat() - step)


def squared_error(pred, target):
    diff = pred - target
    return diff * diff, 2.0 * diff


def bce(pred, label):
    """Binary cross-entropy of a probability and its derivative w.r.t. the probability."""
    pred = np.asarray(pred, dtype=float)
    if np.any(~np.isfinite(pred)) or np.any(pred < 0.0) or np.any(pred > 1.0):
        raise ValueError(f"probability outside [0, 1]: {pred}")
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -(label * np.log(p) + (1.0 - label) * np.log1p(-p))
    dpred = (p - label) / (p * (1.0 - p))
    if loss.ndim == 0:
        return float(loss), float(dpred)
    return loss, dpred


def bce_with_logits(z, label):
    """Fused logistic + cross-entropy: loss and derivative w.r.t. the logit."""
    z = np.asarray(z, dtype=float)
    loss = np.logaddexp(0.0, z) - label * z
    return loss, sigmoid(z) - label


# ---------------------------------------------------------------- snapshots

def save_params(params: MlpParams, path) -> None:
    header = MAGIC + struct.pack("<4i", params.n_in, params.n_hidden, params.n_out,
                                 _HEAD_CODES[params.head])
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    Path(path).write_bytes(header + body)


def load_params(path) -> MlpParams:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ShapeError(f"{path}: bad magic {data[:len(MAGIC)]!r}")
    off = len(MAGIC)
    n_in, hidden, n_out, code = struct.unpack_from("<4i", data, off)
    off += 16
    heads = {v: k for k, v in _HEAD_CODES.items()}
    if code not in heads:
        raise ShapeError(f"{path}: unknown head code {code}")
    shapes = [(hidden, n_in), (hidden,), (n_out, hidden), (n_out,)]
    need = off + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) != need:
        raise ShapeError(f"{path}: expected {need} bytes, found {len(data)}")
    arrays = []
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(s).astype(float))
        off += 8 * n
    return MlpParams(*arrays, head=heads[code])
