import numpy as np
import pytest

from intrinsic_fear.numerics import MlpParams


def numeric_grad(f, params: MlpParams, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar f(params) over the flat parameter vector."""
    base = params.flat()
    g = np.zeros_like(base)
    for i in range(base.size):
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(params.with_flat(up)) - f(params.with_flat(dn))) / (2 * h)
    return g


def rel_error(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a)), np.max(np.abs(b))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
