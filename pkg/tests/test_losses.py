import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyloss import losses as L
from polyloss.schedule import CoefficientSchedule, poly_series

LN2 = math.log(2)
pts = st.floats(min_value=1e-6, max_value=1.0, allow_nan=False)


class TestClosedForms:
    @pytest.mark.parametrize("spec, expected", [
        (L.LossSpec(L.CE), LN2),
        (L.LossSpec(L.FOCAL, gamma=0.0), LN2),
        (L.LossSpec(L.FOCAL, gamma=2.0), 0.25 * LN2),
        (L.LossSpec(L.POLY1_CE, eps1=2.0), LN2 + 1),
        (L.LossSpec(L.POLY_N_CE, eps=(2.0,)), LN2 + 1),
        (L.LossSpec(L.POLY_N_CE, eps=(1.0, 0.5)), LN2 + 0.5 + 0.125),
        (L.LossSpec(L.POLY1_FL, eps1=-1.0, gamma=2.0), 0.25 * LN2 - 0.125),
        (L.LossSpec(L.POLY1_STAR_FL, eps2=-0.4, gamma=2.0), 0.25 * LN2 - 0.125 - 0.025),
        (L.LossSpec(L.DROP, n=1), 0.5),
        (L.LossSpec(L.DROP, n=2), 0.625),
        (L.LossSpec(L.DROP_FRONT, n=2), LN2 - 0.625),
        (L.LossSpec(L.DROP_FRONT, n=0), LN2),
        (L.LossSpec(L.DROP_STAR, alpha=0.5), 0.625),
        (L.LossSpec(L.DROP_STAR, alpha=8.0), 2.5),
        (L.LossSpec(L.EXP, n=1), 0.5 + math.exp(-1) * 0.25),
        (L.LossSpec(L.GENERAL, coefficients=(1.0, 0.5)), 0.625),
    ])
    def test_value_at_half(self, spec, expected):
        assert L.loss(spec, 0.5) == pytest.approx(expected, abs=1e-12)

    def test_drop_zero_is_empty(self):
        assert L.drop_loss(0.3, 0) == 0.0

    @pytest.mark.parametrize("spec", [L.LossSpec(L.DROP_FRONT, n=5), L.LossSpec(L.DROP_STAR, alpha=8.0),
                                      L.LossSpec(L.POLY1_CE, eps1=3.0)])
    def test_zero_at_pt_one(self, spec):
        assert L.loss(spec, 1.0) == 0.0

    def test_ce_at_one_is_zero(self):
        assert L.ce_loss(1.0) == 0.0

    def test_clamp_keeps_ce_finite(self):
        assert L.ce_loss(0.0) == pytest.approx(-math.log(L.PT_MIN))

    def test_vectorised_matches_scalar(self):
        grid = np.linspace(0.05, 1.0, 20)
        spec = L.LossSpec(L.POLY1_FL, eps1=0.5, gamma=2.0)
        vec = L.loss(spec, grid)
        assert np.allclose(vec, [L.loss(spec, float(p)) for p in grid], rtol=0, atol=1e-15)

    def test_general_accepts_schedule(self):
        sched = CoefficientSchedule.harmonic(2)
        assert L.general_poly_loss(0.5, sched) == pytest.approx(0.625)


class TestGradients:
    def test_focal_grad_at_half(self):
        g = L.loss_grad_pt(L.LossSpec(L.FOCAL, gamma=2.0), 0.5)
        assert g == pytest.approx(-(0.5 + LN2), rel=1e-12)

    def test_poly1_grad_at_half(self):
        assert L.loss_grad_pt(L.LossSpec(L.POLY1_CE, eps1=2.0), 0.5) == pytest.approx(-4.0)

    def test_drop_front_grad_is_tail(self):
        # d/dp of the dropped tail is -(1-p)^N / p
        p = 0.3
        g = L.loss_grad_pt(L.LossSpec(L.DROP_FRONT, n=3), p)
        assert g == pytest.approx(-(0.7 ** 3) / p, rel=1e-12)

    def test_grad_rejects_zero(self):
        with pytest.raises(ValueError):
            L.loss_grad_pt(L.LossSpec(L.CE), 0.0)

    @pytest.mark.parametrize("spec", [
        L.LossSpec(L.CE), L.LossSpec(L.DROP, n=4), L.LossSpec(L.EXP, n=3),
        L.LossSpec(L.DROP_STAR, alpha=2.0), L.LossSpec(L.POLY1_STAR_FL, eps2=0.1, gamma=1.0),
    ])
    def test_grad_matches_central_difference(self, spec):
        h = 1e-6
        for p in (0.2, 0.5, 0.8):
            fd = (L.loss(spec, p + h) - L.loss(spec, p - h)) / (2 * h)
            assert L.loss_grad_pt(spec, p) == pytest.approx(fd, rel=1e-6, abs=1e-7)


class TestIdentities:
    @given(pts)
    def test_poly1_zero_is_ce(self, p):
        assert L.poly1_ce(p, 0.0) == L.ce_loss(p)

    @given(pts)
    def test_focal_gamma_zero_is_ce(self, p):
        assert L.focal_loss(p, 0.0) == L.ce_loss(p)

    @given(pts)
    def test_drop_front_zero_is_ce(self, p):
        assert L.drop_front_loss(p, 0) == L.ce_loss(p)

    @given(pts, st.integers(1, 40))
    def test_drop_is_harmonic_general(self, p, n):
        assert L.drop_loss(p, n) == L.general_poly_loss(p, CoefficientSchedule.harmonic(n))

    @given(pts, st.integers(0, 30))
    def test_drop_plus_front_is_ce(self, p, n):
        total = L.drop_loss(p, n) + L.drop_front_loss(p, n)
        assert total == pytest.approx(L.ce_loss(p), rel=1e-12, abs=1e-12)

    @given(pts, st.floats(-1.0, 10.0))
    def test_eps_linearity(self, p, eps):
        assert L.poly1_ce(p, eps) - L.ce_loss(p) == pytest.approx(eps * (1 - p), abs=1e-12)

    @settings(max_examples=50)
    @given(st.floats(0.0, 5.0))
    def test_focal_monotone_decreasing(self, gamma):
        grid = np.linspace(0.01, 1.0, 100)
        vals = L.focal_loss(grid, gamma)
        assert np.all(np.diff(vals) <= 1e-15)

    @given(pts)
    def test_losses_nonnegative_at_admissible_params(self, p):
        for spec in (L.LossSpec(L.POLY1_CE, eps1=-1.0), L.LossSpec(L.POLY1_FL, eps1=-1.0, gamma=2.0),
                     L.LossSpec(L.POLY1_STAR_FL, eps2=-0.5, gamma=2.0)):
            assert L.loss(spec, p) >= -1e-15


class TestSpecValidation:
    @pytest.mark.parametrize("kwargs, match", [
        ({"family": L.POLY1_CE, "eps1": -1.5}, "eps1"),
        ({"family": L.POLY_N_CE, "eps": (0.0, -0.6)}, "eps"),
        ({"family": L.POLY1_STAR_FL, "eps2": -0.6, "gamma": 2.0}, "eps2"),
        ({"family": L.FOCAL, "gamma": -1.0}, "gamma"),
        ({"family": L.DROP, "n": -1}, "n"),
        ({"family": L.DROP, "n": 1.5}, "n"),
        ({"family": L.DROP_STAR, "alpha": -0.1}, "alpha"),
        ({"family": L.GENERAL, "coefficients": (1.0, -0.1)}, "coefficient"),
        ({"family": "hinge"}, "family"),
    ])
    def test_rejects_out_of_bound(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            L.LossSpec(**kwargs)

    def test_small_gamma_warns(self):
        assert L.LossSpec(L.FOCAL, gamma=0.5).warnings

    def test_round_trip(self):
        spec = L.LossSpec(L.POLY1_FL, eps1=1.0, gamma=2.0)
        assert L.LossSpec.from_dict(spec.to_dict()) == spec

    def test_with_param(self):
        spec = L.LossSpec(L.POLY1_CE, eps1=1.0).with_param("eps1", 2.0)
        assert spec.eps1 == 2.0


class TestPolySeries:
    def test_compensated_sum_beats_naive(self):
        coeffs = [1.0] + [1e-16] * 1000
        assert poly_series(coeffs, 1.0) == pytest.approx(1.0 + 1e-13, rel=1e-15)

    def test_vector_input(self):
        out = poly_series([1.0, 0.5], np.array([0.5, 0.0]))
        assert np.allclose(out, [0.625, 0.0])
