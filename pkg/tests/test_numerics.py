import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_fear.numerics import (IDENTITY, LOGISTIC, AdamState, MlpParams, ShapeError,
                                     adam_step, backward, bce, bce_with_logits, forward,
                                     forward_logits, init_params, load_params, save_params,
                                     sigmoid, squared_error, zero_params)

from conftest import numeric_grad, rel_error


def hand_forward(p: MlpParams, x):
    # independent scalar loops, no matrix products
    out = []
    for k in range(p.n_out):
        acc = p.b2[k]
        for j in range(p.n_hidden):
            pre = p.b1[j] + sum(p.w1[j, i] * x[i] for i in range(p.n_in))
            acc += p.w2[k, j] * max(pre, 0.0)
        out.append(acc)
    out = np.array(out)
    if p.head == LOGISTIC:
        out = 1.0 / (1.0 + np.exp(-out))
    return out


class TestForward:
    def test_zero_identity(self, rng):
        p = zero_params(3, 2, hidden=8)
        assert np.all(forward(p, rng.normal(size=3)) == 0.0)

    def test_zero_logistic(self, rng):
        p = zero_params(3, 2, hidden=8, head=LOGISTIC)
        assert np.all(forward(p, rng.normal(size=(5, 3))) == 0.5)

    @pytest.mark.parametrize("head", [IDENTITY, LOGISTIC])
    def test_matches_hand_chain(self, rng, head):
        for _ in range(20):
            p = init_params(4, 3, hidden=7, head=head, rng=rng)
            x = rng.normal(size=4)
            np.testing.assert_allclose(forward(p, x), hand_forward(p, x), rtol=0, atol=1e-12)

    def test_batch_equals_rows(self, rng):
        p = init_params(2, 3, hidden=5, rng=rng)
        X = rng.normal(size=(6, 2))
        out = forward(p, X)
        for i in range(6):
            np.testing.assert_allclose(out[i], forward(p, X[i]), atol=1e-14)

    def test_shape_error(self, rng):
        p = init_params(2, 1, hidden=4, rng=rng)
        with pytest.raises(ShapeError):
            forward(p, np.zeros(3))

    def test_bad_param_shapes(self):
        with pytest.raises(ShapeError):
            MlpParams(np.zeros((4, 2)), np.zeros(3), np.zeros((1, 4)), np.zeros(1))

    def test_sigmoid_extremes(self):
        s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        assert np.all(np.isfinite(s))
        np.testing.assert_allclose(s, [0.0, 0.5, 1.0])


class TestBackward:
    def test_zero_upstream(self, rng):
        p = init_params(3, 2, hidden=6, rng=rng)
        g = backward(p, rng.normal(size=3), np.zeros(2))
        assert all(np.all(a == 0) for a in g.arrays())

    def test_linear_path_w2_grad_is_activation(self):
        # one input, one hidden unit in its active region, one output
        p = MlpParams(np.array([[2.0]]), np.array([0.5]), np.array([[3.0]]), np.array([0.1]))
        x = np.array([1.5])
        g = backward(p, x, np.array([1.0]))
        assert g.w2[0, 0] == pytest.approx(2.0 * 1.5 + 0.5)
        assert g.b2[0] == 1.0
        assert g.w1[0, 0] == pytest.approx(3.0 * 1.5)

    @pytest.mark.parametrize("head", [IDENTITY, LOGISTIC])
    def test_finite_differences_100(self, head):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            n_in, n_out, hid = (int(v) for v in rng.integers(1, 5, size=3))
            p = init_params(n_in, n_out, hidden=hid, head=head, rng=rng)
            X = rng.normal(size=(3, n_in))
            U = rng.normal(size=(3, n_out))
            # backward's cotangent is w.r.t. the logit for logistic heads
            f = lambda q: float(np.sum(U * forward_logits(q, X)))
            worst = max(worst, rel_error(backward(p, X, U).flat(), numeric_grad(f, p)))
        assert worst < 1e-4

    def test_upstream_shape_error(self, rng):
        p = init_params(2, 2, hidden=3, rng=rng)
        with pytest.raises(ShapeError):
            backward(p, np.zeros(2), np.zeros(3))


class TestAdam:
    def test_zero_grad_keeps_params(self, rng):
        p = init_params(2, 2, hidden=3, rng=rng)
        st0 = AdamState.for_params(p)
        st1, p1 = adam_step(st0, p, zero_params(2, 2, hidden=3))
        np.testing.assert_array_equal(p1.flat(), p.flat())
        assert st1.t == 1 and st0.t == 0

    def test_first_step_is_sign_step(self):
        p = MlpParams(np.array([[0.3]]), np.array([0.0]), np.array([[0.0]]), np.array([0.0]))
        g = MlpParams(np.array([[-2.5]]), np.array([0.0]), np.array([[0.0]]), np.array([0.0]))
        st0 = AdamState.for_params(p, alpha=0.01)
        _, p1 = adam_step(st0, p, g)
        assert p1.w1[0, 0] - 0.3 == pytest.approx(0.01, rel=1e-6)

    def test_hand_stepped_trace(self):
        # frozen from tests/oracles/adam_trace.py
        expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303]
        p = MlpParams(np.array([[1.0]]), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
        st_ = AdamState.for_params(p, alpha=0.1)
        trace = []
        for _ in range(3):
            w = p.w1[0, 0]
            g = MlpParams(np.array([[2.0 * w]]), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
            st_, p = adam_step(st_, p, g)
            trace.append(p.w1[0, 0])
        np.testing.assert_allclose(trace, expected, rtol=0, atol=1e-14)
        assert trace[0] < 1.0 and trace[1] < trace[0] and trace[2] < trace[1]

    def test_inputs_not_mutated(self, rng):
        p = init_params(2, 2, hidden=3, rng=rng)
        g = init_params(2, 2, hidden=3, rng=rng)
        st0 = AdamState.for_params(p)
        before = p.flat().copy(), st0.m.copy()
        adam_step(st0, p, g)
        np.testing.assert_array_equal(p.flat(), before[0])
        np.testing.assert_array_equal(st0.m, before[1])

    def test_shape_mismatch(self, rng):
        p = init_params(2, 2, hidden=3, rng=rng)
        with pytest.raises(ShapeError):
            adam_step(AdamState.for_params(p), p, init_params(2, 2, hidden=4, rng=rng))

    def test_bad_hyperparameters(self, rng):
        with pytest.raises(ValueError):
            AdamState.for_params(init_params(1, 1, hidden=1, rng=rng), alpha=0.0)


class TestLosses:
    @pytest.mark.parametrize("pred,target,out", [(3, 3, (0, 0)), (5, 3, (4, 4)), (0, -39, (1521, 78))])
    def test_squared_error(self, pred, target, out):
        assert squared_error(pred, target) == out

    @pytest.mark.parametrize("p,y,loss", [(0.5, 1, math.log(2)), (0.5, 0, math.log(2)),
                                          (0.9, 1, -math.log(0.9))])
    def test_bce_values(self, p, y, loss):
        assert bce(p, y)[0] == pytest.approx(loss, abs=1e-12)
        assert round(bce(p, y)[0], 4) == round(loss, 4)

    def test_bce_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            bce(1.2, 1)
        with pytest.raises(ValueError):
            bce(float("nan"), 0)

    def test_bce_clamps_extremes(self):
        loss, d = bce(0.0, 1)
        assert np.isfinite(loss) and np.isfinite(d)

    @settings(max_examples=200, deadline=None)
    @given(z=st.floats(-30, 30), y=st.sampled_from([0.0, 1.0]))
    def test_logit_form_agrees_with_probability_form(self, z, y):
        loss_z, dz = bce_with_logits(z, y)
        p = float(sigmoid(z))
        if 1e-6 < p < 1 - 1e-6:
            loss_p, dp = bce(p, y)
            assert float(loss_z) == pytest.approx(loss_p, rel=1e-6, abs=1e-9)
            assert float(dz) == pytest.approx(dp * p * (1 - p), rel=1e-6, abs=1e-9)


class TestSnapshots:
    @pytest.mark.parametrize("head", [IDENTITY, LOGISTIC])
    def test_round_trip_bitwise(self, tmp_path, rng, head):
        p = init_params(4, 2, hidden=9, head=head, rng=rng)
        save_params(p, tmp_path / "p.bin")
        q = load_params(tmp_path / "p.bin")
        assert q.head == head
        for a, b in zip(p.arrays(), q.arrays()):
            assert a.tobytes() == b.tobytes()

    def test_rejects_bad_magic(self, tmp_path):
        (tmp_path / "x.bin").write_bytes(b"NOTMLP" + bytes(40))
        with pytest.raises(ShapeError):
            load_params(tmp_path / "x.bin")

    def test_rejects_truncated(self, tmp_path, rng):
        save_params(init_params(2, 1, hidden=3, rng=rng), tmp_path / "p.bin")
        data = (tmp_path / "p.bin").read_bytes()
        (tmp_path / "p.bin").write_bytes(data[:-8])
        with pytest.raises(ShapeError):
            load_params(tmp_path / "p.bin")


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_in=st.integers(1, 5), n_out=st.integers(1, 3))
def test_init_is_bounded_and_flat_round_trips(seed, n_in, n_out):
    p = init_params(n_in, n_out, hidden=6, rng=np.random.default_rng(seed))
    assert np.all(np.abs(p.w1) <= 1 / math.sqrt(n_in))
    assert np.all(np.abs(p.w2) <= 1 / math.sqrt(6))
    np.testing.assert_array_equal(p.with_flat(p.flat()).flat(), p.flat())
