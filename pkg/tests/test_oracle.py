import math

import numpy as np
import pytest

from polyloss import oracle as O
from polyloss import verify as V


class TestPrimitives:
    def test_finite_diff_quadratic(self):
        assert O.finite_diff(lambda p: p * p, 0.5) == pytest.approx(1.0, abs=1e-9)

    def test_finite_diff_stencil_must_stay_inside(self):
        with pytest.raises(ValueError):
            O.finite_diff(math.log, 1.0)

    def test_finite_diff_array(self):
        g = O.finite_diff_array(lambda z: float(np.sum(z ** 2)), np.array([[1.0, -2.0]]))
        assert np.allclose(g, [[2.0, -4.0]], atol=1e-8)

    def test_harmonic_series_at_min_horizon(self):
        assert abs(O.brute_series(O.harmonic_rule, 0.5, 66) - math.log(2)) < 0.01

    def test_exp_rule(self):
        assert O.brute_series(O.exp_decay_rule(1), 0.5, 2) == pytest.approx(0.5 + math.exp(-1) / 4)

    def test_brute_series_rejects_empty(self):
        with pytest.raises(ValueError):
            O.brute_series(O.harmonic_rule, 0.5, 0)

    @pytest.mark.parametrize("name, kw, expected", [
        ("ce", {}, math.log(2)),
        ("focal", {"gamma": 2.0}, 0.25 * math.log(2)),
        ("poly1-ce", {"eps1": 2.0}, math.log(2) + 1),
        ("poly1-fl", {"gamma": 2.0, "eps1": -1.0}, 0.25 * math.log(2) - 0.125),
        ("poly1-star-fl", {"gamma": 2.0, "eps2": -0.4}, 0.25 * math.log(2) - 0.15),
    ])
    def test_reference_loss(self, name, kw, expected):
        assert O.reference_loss(name, 0.5, **kw) == pytest.approx(expected, abs=1e-15)

    def test_reference_unknown(self):
        with pytest.raises(ValueError):
            O.reference_loss("drop", 0.5)


class TestReports:
    def test_relative_above_one(self):
        r = O.OracleReport.compare("op", "x", 100.0 + 1e-4, 100.0, 1e-5)
        assert r.rel_error == pytest.approx(1e-6) and r.passed

    def test_absolute_near_zero(self):
        r = O.OracleReport.compare("op", "x", 1e-10, 0.0, 1e-9)
        assert r.rel_error == pytest.approx(1e-10) and r.passed

    def test_nan_fails(self):
        assert not O.OracleReport.compare("op", "x", float("nan"), 1.0, 1.0).passed

    def test_empty_suite_rejected(self):
        with pytest.raises(ValueError):
            O.cross_check([])

    def test_write_reports(self, tmp_path):
        reps = O.cross_check([O.CheckCase("sq", lambda x: x * x, lambda x: x ** 2, [1.0, 2.0], 1e-12)])
        path = tmp_path / "r.csv"
        O.write_reports(reps, path)
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == list(O.REPORT_FIELDS)
        assert len(lines) == 3


class TestSuites:
    def test_corrupted_gradient_detected(self):
        assert V.corrupted_gradient_detected()

    def test_corrupted_series_detected(self):
        assert V.corrupted_series_detected()

    def test_theorem1_suite(self):
        assert V.run_suite("theorem1").passed

    def test_theorem1_custom(self):
        res = V.run_suite("theorem1", zeta=0.01, delta=0.1)
        assert [r.n for r in res.residuals] == [66]

    def test_expansion_suite(self):
        assert V.run_suite("expansion").passed

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            V.run_suite("nope")
