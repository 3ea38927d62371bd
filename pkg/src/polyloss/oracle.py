"""Independent reference computations for checking the loss library.

Nothing in this module imports the loss, schedule, or series code: the
reference series are summed naively in extended precision, reference loss
values come from mpmath, and derivatives come from central differences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

DEFAULT_H = 1e-6
# below this magnitude the relative error falls back to the absolute error
SMALL = 1e-8

REPORT_FIELDS = ("op_name", "inputs", "primary_value", "oracle_value", "abs_error",
                 "rel_error", "tolerance", "passed")


def finite_diff(evaluator: Callable[[float], float], pt: float, h: float = DEFAULT_H) -> float:
    """Central difference ``(L(pt + h) - L(pt - h)) / 2h``."""
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    if not (0 < pt - h and pt + h <= 1):
        raise ValueError(f"stencil [{pt - h}, {pt + h}] leaves (0, 1]")
    return (evaluator(pt + h) - evaluator(pt - h)) / (2 * h)


def finite_diff_array(evaluator: Callable[[np.ndarray], float], x: np.ndarray,
                      h: float = DEFAULT_H) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        fp = evaluator(x)
        x[idx] = orig - h
        fm = evaluator(x)
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad


# coefficient rules: power j -> alpha_j, written out independently

def harmonic_rule(j: int) -> float:
    return 1.0 / j


def focal_rule(gamma: int) -> Callable[[int], float]:
    return lambda j: 1.0 / (j - gamma) if j > gamma else 0.0


def poly1_rule(eps1: float) -> Callable[[int], float]:
    return lambda j: 1.0 + eps1 if j == 1 else 1.0 / j


def poly1_focal_rule(eps1: float, gamma: int) -> Callable[[int], float]:
    base = focal_rule(gamma)
    return lambda j: base(j) + (eps1 if j == gamma + 1 else 0.0)


def poly1_star_focal_rule(eps2: float, gamma: int) -> Callable[[int], float]:
    base = focal_rule(gamma)

    def rule(j):
        if j == gamma + 1:
            return 0.0
        if j == gamma + 2:
            return 0.5 + eps2
        return base(j)
    return rule


def exp_decay_rule(n: int) -> Callable[[int], float]:
    return lambda j: math.exp(-(j - 1) / n) if j <= 2 * n else 0.0


def brute_series(rule: Callable[[int], float], pt: float, horizon: int) -> float:
    """Naive ascending sum of ``rule(j) * (1 - pt)**j`` in extended precision."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    x = np.longdouble(1) - np.longdouble(pt)
    total = np.longdouble(0)
    power = np.longdouble(1)
    for j in range(1, horizon + 1):
        power = power * x
        total = total + np.longdouble(rule(j)) * power
    return float(total)


def reference_loss(name: str, pt: float, *, gamma: float = 0.0, eps1: float = 0.0,
                   eps2: float = 0.0) -> float:
    """Closed-form loss at 50 digits, for the families with a log term."""
    with mpmath.workdps(50):
        p = mpmath.mpf(pt)
        x = 1 - p
        ce = -mpmath.log(p)
        fl = x ** gamma * ce
        if name == "ce":
            v = ce
        elif name == "focal":
            v = fl
        elif name == "poly1-ce":
            v = ce + eps1 * x
        elif name == "poly1-fl":
            v = fl + eps1 * x ** (gamma + 1)
        elif name == "poly1-star-fl":
            v = fl - x ** (gamma + 1) + eps2 * x ** (gamma + 2)
        else:
            raise ValueError(f"no reference closed form for {name!r}")
        return float(v)


@dataclass
class OracleReport:
    op_name: str
    inputs: str
    primary_value: float
    oracle_value: float
    abs_error: float
    rel_error: float
    tolerance: float
    passed: bool

    @classmethod
    def compare(cls, op_name: str, inputs: str, primary: float, oracle: float,
                tolerance: float) -> "OracleReport":
        abs_err = abs(primary - oracle)
        scale = max(abs(primary), abs(oracle))
        # relative to max(1, |value|): absolute for small values, relative for large
        rel_err = abs_err if scale < SMALL else abs_err / max(1.0, abs(oracle))
        passed = bool(np.isfinite(abs_err) and rel_err < tolerance)
        return cls(op_name, inputs, float(primary), float(oracle), float(abs_err),
                   float(rel_err), float(tolerance), passed)

    def to_row(self) -> dict:
        return asdict(self)


@dataclass
class CheckCase:
    """One primary/oracle pair evaluated over a list of inputs."""

    name: str
    primary: Callable
    oracle: Callable
    inputs: Sequence
    tolerance: float
    describe: Callable = repr


def cross_check(suite: Iterable[CheckCase]) -> list[OracleReport]:
    suite = list(suite)
    if not suite:
        raise ValueError("cross_check needs a nonempty suite")
    reports = []
    for case in suite:
        for inp in case.inputs:
            reports.append(OracleReport.compare(case.name, case.describe(inp), case.primary(inp),
                                                case.oracle(inp), case.tolerance))
    return reports


def all_passed(reports: Iterable[OracleReport]) -> bool:
    return all(r.passed for r in reports)


def write_reports(reports: Iterable, path) -> None:
    """Write report rows (OracleReport or anything with ``to_row``) as CSV."""
    rows = [r.to_row() for r in reports]
    if not rows:
        return
    fieldnames = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)
