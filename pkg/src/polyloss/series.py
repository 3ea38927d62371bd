"""Truncation analysis of the polynomial expansion of cross-entropy.

Covers partial sums of coefficient schedules, the tail left after keeping the
first ``N`` terms of CE, the minimum ``N`` that makes both the tail and its
derivative smaller than ``zeta`` on ``[delta, 1]``, and how the CE gradient
splits between its leading terms and the rest.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from polyloss import losses as L
from polyloss.schedule import CoefficientSchedule, poly_series

SERIES_FAMILIES = (L.CE, L.FOCAL, L.POLY1_CE, L.POLY_N_CE, L.POLY1_FL, L.POLY1_STAR_FL)


def coefficient(schedule: CoefficientSchedule, j: int) -> float:
    return schedule.coefficient(j)


def partial_sum(schedule: CoefficientSchedule, pt, n: int):
    """Sum of the first ``n`` terms of ``schedule`` at ``pt``."""
    return poly_series(schedule.coefficients(n), 1.0 - L.clamp_pt(pt))


def residual(pt, n: int):
    """CE minus its first ``n`` polynomial terms."""
    if np.any(np.asarray(pt) <= 0):
        raise ValueError("residual is undefined at pt = 0")
    return L.drop_front_loss(pt, n)


def residual_derivative(pt, n: int):
    """d/dpt of :func:`residual`, via the geometric tail ``-(1-pt)**n / pt``."""
    p = np.asarray(pt, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("residual derivative is undefined at pt = 0")
    return L._out(-np.power(1.0 - p, n) / p)


def theorem1_min_n(zeta: float, delta: float) -> int:
    """Smallest integer ``N`` with ``N > log_{1-delta}(zeta * delta)``."""
    if not zeta > 0:
        raise ValueError(f"zeta must be > 0, got {zeta}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    bound = math.log(zeta * delta) / math.log1p(-delta)
    nearest = round(bound)
    if math.isclose(bound, nearest, rel_tol=1e-12, abs_tol=1e-12):
        # exact boundary: strict inequality pushes N one past it
        return max(int(nearest) + 1, 1)
    return max(math.floor(bound) + 1, 1)


def tail_bound(n: int, delta: float) -> float:
    """Upper bound ``(1-delta)**n / delta`` on both |R_n| and |R_n'| over [delta, 1]."""
    return (1.0 - delta) ** n / delta


@dataclass
class ResidualReport:
    n: int
    delta: float
    zeta: float
    max_abs_residual: float
    max_abs_residual_derivative: float
    grid: list[float]

    @property
    def passed(self) -> bool:
        return self.max_abs_residual < self.zeta and self.max_abs_residual_derivative < self.zeta

    def to_row(self) -> dict:
        """Flat record for CSV/JSON; the grid is summarized by its extent."""
        return {
            "n": self.n,
            "delta": self.delta,
            "zeta": self.zeta,
            "max_abs_residual": self.max_abs_residual,
            "max_abs_residual_derivative": self.max_abs_residual_derivative,
            "bound": tail_bound(self.n, self.delta),
            "grid_min": min(self.grid),
            "grid_max": max(self.grid),
            "grid_points": len(self.grid),
            "passed": self.passed,
        }


def pt_grid(start: float, stop: float = 1.0, step: float = 0.01) -> np.ndarray:
    """Inclusive grid built from integer multiples of ``step`` (no drift)."""
    count = int(round((stop - start) / step))
    grid = start + step * np.arange(count + 1)
    grid[-1] = stop
    return grid


def verify_theorem1(zeta: float, delta: float, grid_step: float = 0.01) -> ResidualReport:
    n = theorem1_min_n(zeta, delta)
    grid = pt_grid(delta, 1.0, grid_step)
    if len(grid) < 10:
        raise ValueError(f"grid step {grid_step} gives only {len(grid)} points on [{delta}, 1]")
    res = np.abs(residual(grid, n))
    dres = np.abs(residual_derivative(grid, n))
    return ResidualReport(n, delta, zeta, float(res.max()), float(dres.max()), grid.tolist())


def gradient_fraction(pt, k: int = 1):
    """Share of the CE gradient carried by its first ``k`` polynomial terms."""
    p = np.asarray(pt, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("gradient fraction is undefined at pt = 0")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        # the leading gradient term is the constant 1 out of a total of 1/pt
        return L._out(p.copy())
    with np.errstate(divide="ignore"):
        return L._out(-np.expm1(k * np.log1p(-p)))


def gradient_fraction_numeric(pt: float, k: int = 1, horizon: int | None = None) -> float:
    """Truncated-sum ratio behind :func:`gradient_fraction`.

    The default horizon is ``10 * k`` extended until the dropped tail
    ``(1 - pt)**horizon`` is below 1e-12, so the ratio tracks the closed form.
    """
    if not 0 < pt <= 1:
        raise ValueError(f"pt must lie in (0, 1], got {pt}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = 1.0 - pt
    if horizon is None:
        horizon = 10 * k
        if x > 0:
            horizon = max(horizon, math.ceil(math.log(1e-12) / math.log(x)))
    if horizon < k:
        raise ValueError(f"horizon {horizon} is shorter than k={k}")
    terms = np.ones(horizon)
    if x > 0:
        terms = x ** np.arange(horizon)
    else:
        terms[1:] = 0.0
    return poly_series(terms[:k], 1.0, start=0) / poly_series(terms, 1.0, start=0)


def schedule_for(spec: L.LossSpec, n: int) -> CoefficientSchedule:
    """Coefficient schedule of ``spec`` keeping CE-index terms up to ``n``.

    Focal-type schedules are shifted, so their horizon is ``n + gamma`` in
    basis powers.
    """
    f = spec.family
    if f in (L.FOCAL, L.POLY1_FL, L.POLY1_STAR_FL):
        if float(spec.gamma) != int(spec.gamma):
            raise ValueError(f"series expansion needs an integer gamma, got {spec.gamma}")
        g = int(spec.gamma)
        base = CoefficientSchedule.focal_shifted(g, n + g)
        if f == L.FOCAL:
            return base
        if f == L.POLY1_FL:
            return CoefficientSchedule.perturbed(base, {g + 1: spec.eps1})
        return CoefficientSchedule.perturbed(base, {g + 1: -1.0, g + 2: spec.eps2})
    if f == L.CE:
        return CoefficientSchedule.harmonic(n)
    if f == L.POLY1_CE:
        return CoefficientSchedule.perturbed(CoefficientSchedule.harmonic(n), {1: spec.eps1})
    if f == L.POLY_N_CE:
        eps = dict(enumerate(spec.eps, start=1))
        return CoefficientSchedule.perturbed(CoefficientSchedule.harmonic(max(n, len(eps))), eps)
    if f == L.DROP:
        return CoefficientSchedule.explicit([1.0 / j if j <= spec.n else 0.0
                                             for j in range(1, max(n, spec.n) + 1)])
    if f == L.DROP_FRONT:
        return CoefficientSchedule.explicit([1.0 / j if j > spec.n else 0.0
                                             for j in range(1, n + 1)])
    if f == L.DROP_STAR:
        return CoefficientSchedule.explicit([1.0, spec.alpha] + [0.0] * max(n - 2, 0))
    if f == L.EXP:
        return CoefficientSchedule.exp_decay(spec.n, max(n, 2 * spec.n))
    coeffs = list(spec.coefficients) + [0.0] * max(n - len(spec.coefficients), 0)
    return CoefficientSchedule.explicit(coeffs)


@dataclass
class EquivalenceResult:
    family: str
    horizon: int
    tolerance: float
    max_error: float
    passed: bool

    def to_row(self) -> dict:
        return asdict(self)


def expansion_equivalence(spec: L.LossSpec, grid: Sequence[float] | None = None,
                          tolerance: float = 0.01) -> EquivalenceResult:
    """Compare the closed-form loss with its truncated series on ``grid``."""
    if spec.family not in SERIES_FAMILIES:
        raise ValueError(f"no series comparison defined for family {spec.family!r}")
    grid = pt_grid(0.1) if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.min() < 0.1 or grid.max() > 1.0:
        raise ValueError("expansion checks are limited to pt in [0.1, 1]")
    n = theorem1_min_n(tolerance, float(grid.min()))
    schedule = schedule_for(spec, n)
    err = np.abs(L.loss(spec, grid) - partial_sum(schedule, grid, schedule.horizon))
    worst = float(err.max())
    return EquivalenceResult(spec.family, schedule.horizon, tolerance, worst, worst < tolerance)
