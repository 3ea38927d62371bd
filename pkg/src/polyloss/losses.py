"""Loss values and closed-form derivatives as functions of the target probability.

Every loss here is a function of ``pt``, the predicted probability of the
ground-truth class.  Inputs are clamped to ``[PT_MIN, 1]`` before evaluation
so that ``pt = 0`` stays finite.  All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from polyloss.schedule import CoefficientSchedule, poly_series

PT_MIN = 1e-12

CE = "ce"
FOCAL = "focal"
POLY1_CE = "poly1-ce"
POLY_N_CE = "poly-n-ce"
POLY1_FL = "poly1-fl"
POLY1_STAR_FL = "poly1-star-fl"
DROP = "drop"
DROP_FRONT = "drop-front"
DROP_STAR = "drop-star"
EXP = "exp"
GENERAL = "general"

FAMILIES = (CE, FOCAL, POLY1_CE, POLY_N_CE, POLY1_FL, POLY1_STAR_FL,
            DROP, DROP_FRONT, DROP_STAR, EXP, GENERAL)

# parameters each family actually reads; everything else stays at its default
FAMILY_PARAMS = {
    CE: (),
    FOCAL: ("gamma",),
    POLY1_CE: ("eps1",),
    POLY_N_CE: ("eps",),
    POLY1_FL: ("eps1", "gamma"),
    POLY1_STAR_FL: ("eps2", "gamma"),
    DROP: ("n",),
    DROP_FRONT: ("n",),
    DROP_STAR: ("alpha",),
    EXP: ("n",),
    GENERAL: ("coefficients",),
}


@dataclass(frozen=True)
class LossSpec:
    """One loss family plus its parameters, validated at construction."""

    family: str
    eps1: float = 0.0
    eps2: float = 0.0
    eps: tuple[float, ...] = ()
    gamma: float = 0.0
    n: int = 0
    alpha: float = 0.0
    coefficients: tuple[float, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        f = self.family
        if f not in FAMILIES:
            raise ValueError(f"unknown loss family {f!r}; expected one of {', '.join(FAMILIES)}")
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        uses = FAMILY_PARAMS[f]
        if "gamma" in uses:
            if not self.gamma >= 0:
                raise ValueError(f"gamma must be >= 0, got {self.gamma}")
            if 0 < self.gamma < 1:
                object.__setattr__(self, "warnings", (
                    f"gamma={self.gamma} < 1: focal derivative grows without bound as pt -> 1",))
        if "eps1" in uses and not self.eps1 >= -1:
            raise ValueError(f"eps1 must be >= -1, got {self.eps1}")
        if "eps2" in uses and not self.eps2 >= -0.5:
            raise ValueError(f"eps2 must be >= -1/2, got {self.eps2}")
        if "eps" in uses:
            for j, e in enumerate(self.eps, start=1):
                if not e >= -1.0 / j:
                    raise ValueError(f"eps_{j} must be >= -1/{j}, got {e}")
        if "n" in uses:
            if int(self.n) != self.n or self.n < 0:
                raise ValueError(f"n must be a nonnegative integer, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
            if f == EXP and self.n < 1:
                raise ValueError("exp loss needs n >= 1")
        if "alpha" in uses and not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if "coefficients" in uses:
            for j, c in enumerate(self.coefficients, start=1):
                if not c >= 0:
                    raise ValueError(f"coefficient alpha_{j} must be >= 0, got {c}")

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        known = {f.name for f in fields(cls)} - {"warnings"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown loss fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        for name in FAMILY_PARAMS[self.family]:
            value = getattr(self, name)
            d[name] = list(value) if isinstance(value, tuple) else value
        return d

    def with_param(self, name: str, value) -> "LossSpec":
        if name not in FAMILY_PARAMS[self.family]:
            raise ValueError(f"loss family {self.family!r} has no parameter {name!r}")
        return replace(self, **{name: value})


def clamp_pt(pt):
    return np.clip(np.asarray(pt, dtype=np.float64), PT_MIN, 1.0)


def _out(a):
    a = np.asarray(a)
    return a if a.ndim else float(a)


def ce_loss(pt):
    return _out(-np.log(clamp_pt(pt)))


def focal_loss(pt, gamma: float):
    if not gamma >= 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    p = clamp_pt(pt)
    return _out(-np.power(1.0 - p, gamma) * np.log(p))


def poly1_ce(pt, eps1: float):
    if not eps1 >= -1:
        raise ValueError(f"eps1 must be >= -1, got {eps1}")
    p = clamp_pt(pt)
    return _out(-np.log(p) + eps1 * (1.0 - p))


def poly_n_ce(pt, eps: Sequence[float]):
    for j, e in enumerate(eps, start=1):
        if not e >= -1.0 / j:
            raise ValueError(f"eps_{j} must be >= -1/{j}, got {e}")
    p = clamp_pt(pt)
    return _out(-np.log(p) + poly_series(list(eps), 1.0 - p))


def poly1_fl(pt, eps1: float, gamma: float):
    if not eps1 >= -1:
        raise ValueError(f"eps1 must be >= -1, got {eps1}")
    p = clamp_pt(pt)
    return _out(focal_loss(p, gamma) + eps1 * np.power(1.0 - p, gamma + 1))


def poly1_star_fl(pt, eps2: float, gamma: float):
    if not eps2 >= -0.5:
        raise ValueError(f"eps2 must be >= -1/2, got {eps2}")
    p = clamp_pt(pt)
    x = 1.0 - p
    return _out(focal_loss(p, gamma) - np.power(x, gamma + 1) + eps2 * np.power(x, gamma + 2))


def _harmonic(n: int) -> list[float]:
    return [1.0 / j for j in range(1, n + 1)]


def drop_loss(pt, n: int):
    """CE truncated to its first ``n`` polynomial terms."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return poly_series(_harmonic(n), 1.0 - clamp_pt(pt))


def drop_front_loss(pt, n: int):
    """CE with its first ``n`` polynomial terms removed."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    p = clamp_pt(pt)
    return _out(-np.log(p) - poly_series(_harmonic(n), 1.0 - p))


def drop_star_loss(pt, alpha: float):
    if not alpha >= 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    x = 1.0 - clamp_pt(pt)
    return _out(x + alpha * x * x)


def exp_coefficients(n: int) -> list[float]:
    return [math.exp(-(j - 1) / n) for j in range(1, 2 * n + 1)]


def exp_loss(pt, n: int):
    """Exponentially decaying coefficients, cut off at power ``2n``."""
    if n < 1:
        raise ValueError(f"exp loss needs n >= 1, got {n}")
    return poly_series(exp_coefficients(n), 1.0 - clamp_pt(pt))


def general_poly_loss(pt, schedule: CoefficientSchedule | Sequence[float]):
    if isinstance(schedule, CoefficientSchedule):
        coeffs = schedule.coefficients()
    else:
        coeffs = [float(c) for c in schedule]
        for j, c in enumerate(coeffs, start=1):
            if not c >= 0:
                raise ValueError(f"coefficient alpha_{j} must be >= 0, got {c}")
    return poly_series(coeffs, 1.0 - clamp_pt(pt))


def loss(spec: LossSpec, pt):
    """Evaluate ``spec`` at ``pt``."""
    f = spec.family
    if f == CE:
        return ce_loss(pt)
    if f == FOCAL:
        return focal_loss(pt, spec.gamma)
    if f == POLY1_CE:
        return poly1_ce(pt, spec.eps1)
    if f == POLY_N_CE:
        return poly_n_ce(pt, spec.eps)
    if f == POLY1_FL:
        return poly1_fl(pt, spec.eps1, spec.gamma)
    if f == POLY1_STAR_FL:
        return poly1_star_fl(pt, spec.eps2, spec.gamma)
    if f == DROP:
        return drop_loss(pt, spec.n)
    if f == DROP_FRONT:
        return drop_front_loss(pt, spec.n)
    if f == DROP_STAR:
        return drop_star_loss(pt, spec.alpha)
    if f == EXP:
        return exp_loss(pt, spec.n)
    return general_poly_loss(pt, spec.coefficients)


def _focal_grad(p, x, gamma):
    # gamma * x**(gamma-1) * log(p) -> 0 as x -> 0 for any gamma > 0
    safe_x = np.where(x > 0, x, 1.0)
    lead = np.where(x > 0, gamma * np.power(safe_x, gamma - 1.0) * np.log(p), 0.0)
    return lead - np.power(x, gamma) / p


def _series_grad(coeffs: Sequence[float], x):
    # d/dpt sum c_j x^j = -sum j c_j x^(j-1)
    return -poly_series([j * c for j, c in enumerate(coeffs, start=1)], x, start=0)


def loss_grad_pt(spec: LossSpec, pt):
    """Closed-form ``dL/dpt``; ``pt`` must be strictly positive."""
    p = np.asarray(pt, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("loss derivative is unbounded at pt = 0")
    p = np.minimum(p, 1.0)
    x = 1.0 - p
    f = spec.family
    if f == CE:
        g = -1.0 / p
    elif f == FOCAL:
        g = _focal_grad(p, x, spec.gamma)
    elif f == POLY1_CE:
        g = -1.0 / p - spec.eps1
    elif f == POLY_N_CE:
        g = -1.0 / p + _series_grad(spec.eps, x)
    elif f == POLY1_FL:
        g = _focal_grad(p, x, spec.gamma) - spec.eps1 * (spec.gamma + 1) * np.power(x, spec.gamma)
    elif f == POLY1_STAR_FL:
        gm = spec.gamma
        g = (_focal_grad(p, x, gm) + (gm + 1) * np.power(x, gm)
             - spec.eps2 * (gm + 2) * np.power(x, gm + 1))
    elif f == DROP:
        g = _series_grad(_harmonic(spec.n), x)
    elif f == DROP_FRONT:
        # geometric tail: -sum_{j>n} x^(j-1) = -x^n / p
        g = -np.power(x, spec.n) / p
    elif f == DROP_STAR:
        g = -1.0 - 2.0 * spec.alpha * x
    elif f == EXP:
        g = _series_grad(exp_coefficients(spec.n), x)
    else:
        g = _series_grad(spec.coefficients, x)
    return _out(g)
