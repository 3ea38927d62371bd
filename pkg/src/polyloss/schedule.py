"""Polynomial coefficient schedules and compensated series summation.

A schedule assigns a coefficient to every basis power ``(1 - pt)**j`` up to a
finite horizon.  All finite polynomial sums in the package go through
:func:`poly_series`, so two sums built from identical coefficient lists are
bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

HARMONIC = "harmonic"
FOCAL_SHIFTED = "focal-shifted"
PERTURBED = "perturbed"
EXP_DECAY = "exp-decay"
EXPLICIT = "explicit"

RULES = (HARMONIC, FOCAL_SHIFTED, PERTURBED, EXP_DECAY, EXPLICIT)


def poly_series(coefficients: Sequence[float], x, start: int = 1):
    """Sum ``coefficients[k] * x**(start + k)`` in ascending power.

    Accumulation uses Knuth's TwoSum error-free transformation, with the
    running error folded back in at the end.  Works elementwise on arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(x)
    err = np.zeros_like(x)
    for k, c in enumerate(coefficients):
        if c == 0.0:
            continue
        term = c * np.power(x, start + k)
        s = total + term
        bp = s - total
        err += (total - (s - bp)) + (term - bp)
        total = s
    out = total + err
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CoefficientSchedule:
    """Coefficient rule plus truncation horizon (highest basis power kept).

    ``gamma`` is the focal shift for ``focal-shifted``; ``decay`` is the N of
    the exponential rule; ``values`` holds explicit coefficients for powers
    1..len; ``perturbations`` holds ``(power, eps)`` pairs added on top of
    ``base`` for the ``perturbed`` rule.
    """

    rule: str
    horizon: int
    gamma: int = 0
    decay: int = 0
    values: tuple[float, ...] = ()
    base: "CoefficientSchedule | None" = None
    perturbations: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ValueError(f"horizon must be a nonnegative integer, got {self.horizon}")
        if self.rule == FOCAL_SHIFTED and (int(self.gamma) != self.gamma or self.gamma < 0):
            raise ValueError("focal-shifted schedules need a nonnegative integer gamma")
        if self.rule == EXP_DECAY and self.decay < 1:
            raise ValueError("exp-decay schedules need decay N >= 1")
        if self.rule == PERTURBED and self.base is None:
            raise ValueError("perturbed schedule needs a base schedule")
        for j in range(1, self.horizon + 1):
            if self._raw(j) < 0.0:
                raise ValueError(f"coefficient at power {j} is negative ({self._raw(j)})")

    @classmethod
    def harmonic(cls, horizon: int) -> "CoefficientSchedule":
        return cls(HARMONIC, horizon)

    @classmethod
    def focal_shifted(cls, gamma: int, horizon: int) -> "CoefficientSchedule":
        return cls(FOCAL_SHIFTED, horizon, gamma=int(gamma))

    @classmethod
    def exp_decay(cls, n: int, horizon: int | None = None) -> "CoefficientSchedule":
        return cls(EXP_DECAY, 2 * n if horizon is None else horizon, decay=int(n))

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "CoefficientSchedule":
        values = tuple(float(v) for v in values)
        return cls(EXPLICIT, len(values), values=values)

    @classmethod
    def perturbed(cls, base: "CoefficientSchedule", perturbations,
                  horizon: int | None = None) -> "CoefficientSchedule":
        """``perturbations`` maps basis power -> additive eps (dict or pairs)."""
        if isinstance(perturbations, dict):
            perturbations = perturbations.items()
        pairs = tuple(sorted((int(p), float(e)) for p, e in perturbations))
        return cls(PERTURBED, base.horizon if horizon is None else horizon,
                   base=base, perturbations=pairs)

    def _raw(self, j: int) -> float:
        if self.rule == HARMONIC:
            return 1.0 / j
        if self.rule == FOCAL_SHIFTED:
            return 1.0 / (j - self.gamma) if j > self.gamma else 0.0
        if self.rule == EXP_DECAY:
            return math.exp(-(j - 1) / self.decay) if j <= 2 * self.decay else 0.0
        if self.rule == EXPLICIT:
            return self.values[j - 1] if j <= len(self.values) else 0.0
        c = self.base._raw(j)
        for power, eps in self.perturbations:
            if power == j:
                c = c + eps
        return c

    def coefficient(self, j: int) -> float:
        if not 1 <= j <= self.horizon:
            raise ValueError(f"power {j} outside schedule horizon 1..{self.horizon}")
        return self._raw(j)

    def coefficients(self, n: int | None = None) -> list[float]:
        n = self.horizon if n is None else n
        if n > self.horizon:
            raise ValueError(f"requested {n} terms beyond horizon {self.horizon}")
        return [self._raw(j) for j in range(1, n + 1)]

    def to_dict(self) -> dict:
        d = {"rule": self.rule, "horizon": self.horizon}
        if self.rule == FOCAL_SHIFTED:
            d["gamma"] = self.gamma
        elif self.rule == EXP_DECAY:
            d["decay"] = self.decay
        elif self.rule == EXPLICIT:
            d["values"] = list(self.values)
        elif self.rule == PERTURBED:
            d["base"] = self.base.to_dict()
            d["perturbations"] = [list(p) for p in self.perturbations]
        return d
