import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polyloss import activations as A
from polyloss import losses as L

LN2 = math.log(2)
logit_rows = arrays(np.float64, (4, 3), elements=st.floats(-30, 30))


def onehot(logits, classes, **kw):
    return A.LabeledBatch.from_classes(np.atleast_2d(logits), classes, **kw)


class TestProbabilities:
    def test_softmax_symmetric(self):
        assert np.allclose(A.softmax(np.array([[0.0, 0.0]])), [[0.5, 0.5]])

    def test_softmax_large_logits(self):
        s = A.softmax(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(s)) and s[0, 0] == 1.0

    def test_softmax_rejects_nan(self):
        with pytest.raises(ValueError):
            A.softmax(np.array([[np.nan, 0.0]]))

    def test_sigmoid_stable(self):
        z = np.array([-800.0, 0.0, 800.0])
        assert np.allclose(A.sigmoid(z), [0.0, 0.5, 1.0])

    def test_pt_onehot(self):
        assert A.pt_of(onehot([0.0, 0.0], [0]), 0) == pytest.approx(0.5)

    def test_one_minus_pt_smoothed(self):
        b = onehot([0.0, 0.0], [0], kind=A.SMOOTHED, smoothing=0.1)
        assert A.one_minus_pt(b)[0] == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("label", [0.0, 1.0])
    def test_sigmoid_pt(self, label):
        b = A.LabeledBatch(np.array([[0.0]]), np.array([[label]]), A.SIGMOID)
        assert A.pt_all(b)[0, 0] == pytest.approx(0.5)

    @settings(max_examples=50)
    @given(logit_rows)
    def test_pt_in_unit_interval(self, z):
        b = onehot(z, [0, 1, 2, 0])
        p = A.pt_all(b)
        assert np.all((p > 0) & (p <= 1))


class TestListings:
    def test_plain_poly1(self):
        b = onehot([0.0, 0.0], [0])
        assert A.poly1_ce_batch(b, 2.0)[0] == pytest.approx(LN2 + 1, abs=1e-12)

    def test_smoothed_poly1(self):
        b = onehot([0.0, 0.0], [0], kind=A.SMOOTHED, smoothing=0.1)
        assert A.poly1_ce_batch(b, 2.0)[0] == pytest.approx(LN2 + 1, abs=1e-12)

    def test_sigmoid_poly1_fl(self):
        b = A.LabeledBatch(np.array([[0.0]]), np.array([[1.0]]), A.SIGMOID)
        assert A.poly1_fl_batch(b, -1.0, 2.0)[0, 0] == pytest.approx(0.25 * LN2 - 0.125, abs=1e-12)

    def test_sigmoid_eps_zero_is_focal(self):
        b = A.LabeledBatch(np.array([[0.3, -1.2]]), np.array([[1.0, 0.0]]), A.SIGMOID)
        pt = A.pt_all(b)
        assert np.allclose(A.poly1_fl_batch(b, 0.0, 2.0), L.focal_loss(pt, 2.0), rtol=0, atol=1e-15)

    @pytest.mark.parametrize("label, weight", [(1.0, 0.25), (0.0, 0.75)])
    def test_alpha_balance(self, label, weight):
        b = A.LabeledBatch(np.array([[0.0]]), np.array([[label]]), A.SIGMOID)
        plain = A.poly1_fl_batch(b, 1.0, 2.0)
        balanced = A.poly1_fl_batch(b, 1.0, 2.0, 0.25)
        assert balanced[0, 0] == pytest.approx(weight * plain[0, 0], abs=1e-15)

    def test_smoothing_zero_equals_onehot(self):
        z = np.array([[0.3, -1.0, 2.0], [1.0, 1.0, -0.5]])
        a = A.poly1_ce_batch(onehot(z, [2, 0]), 1.5)
        b = A.poly1_ce_batch(onehot(z, [2, 0], kind=A.SMOOTHED, smoothing=0.0), 1.5)
        assert np.array_equal(a, b)

    def test_fl_rejects_softmax(self):
        with pytest.raises(ValueError):
            A.poly1_fl_batch(onehot([0.0, 0.0], [0]), 1.0)


class TestInvariants:
    @settings(max_examples=50)
    @given(logit_rows, st.floats(-20, 20))
    def test_shift_invariance(self, z, c):
        spec = L.LossSpec(L.POLY1_CE, eps1=1.0)
        a = A.batch_losses(onehot(z, [0, 1, 2, 1]), spec)
        b = A.batch_losses(onehot(z + c, [0, 1, 2, 1]), spec)
        assert np.allclose(a, b, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max()))

    @settings(max_examples=50)
    @given(logit_rows, st.floats(-1, 5))
    def test_eps_linearity(self, z, eps):
        b = onehot(z, [0, 1, 2, 1])
        diff = A.poly1_ce_batch(b, eps) - A.poly1_ce_batch(b, 0.0)
        assert np.allclose(diff, eps * A.one_minus_pt(b), rtol=1e-12, atol=1e-12)

    def test_ce_gradient_identity(self):
        z = np.array([[0.3, -1.0, 2.0], [1.0, 1.0, -0.5]])
        b = onehot(z, [2, 0])
        g = A.grad_logits(b, L.LossSpec(L.CE))
        expected = (A.softmax(z) - np.eye(3)[[2, 0]]) / 2
        assert np.allclose(g, expected, atol=1e-15)

    def test_incompatible_pair(self):
        b = onehot([0.0, 0.0], [0], kind=A.SMOOTHED, smoothing=0.1)
        with pytest.raises(ValueError):
            A.grad_logits(b, L.LossSpec(L.FOCAL, gamma=2.0))


class TestBatchValidation:
    def test_label_shape(self):
        with pytest.raises(ValueError):
            A.LabeledBatch(np.zeros((2, 3)), np.zeros((2, 2)), A.SOFTMAX)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            A.LabeledBatch(np.zeros((1, 2)), np.array([[1.0, 0.0]]), "tanh")

    def test_smoothing_range(self):
        with pytest.raises(ValueError):
            onehot([0.0, 0.0], [0], kind=A.SMOOTHED, smoothing=1.5)
