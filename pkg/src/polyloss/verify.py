"""Verification suites pairing library routines with the independent oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from polyloss import activations as A
from polyloss import losses as L
from polyloss import oracle as O
from polyloss import series as S

SUITES = ("theorem1", "gradients", "expansion", "all")

THEOREM1_CASES = ((0.01, 0.1), (0.001, 0.1), (0.05, 0.2))

GRADIENT_SPECS = (
    L.LossSpec(L.CE),
    L.LossSpec(L.FOCAL, gamma=2.0),
    L.LossSpec(L.FOCAL, gamma=1.0),
    L.LossSpec(L.FOCAL, gamma=0.5),
    L.LossSpec(L.POLY1_CE, eps1=2.0),
    L.LossSpec(L.POLY1_CE, eps1=-1.0),
    L.LossSpec(L.POLY_N_CE, eps=(1.0, 0.5, -0.2)),
    L.LossSpec(L.POLY1_FL, eps1=-1.0, gamma=2.0),
    L.LossSpec(L.POLY1_STAR_FL, eps2=-0.4, gamma=2.0),
    L.LossSpec(L.POLY1_STAR_FL, eps2=0.2, gamma=2.0),
    L.LossSpec(L.DROP, n=2),
    L.LossSpec(L.DROP, n=8),
    L.LossSpec(L.DROP_FRONT, n=2),
    L.LossSpec(L.DROP_STAR, alpha=8.0),
    L.LossSpec(L.EXP, n=5),
    L.LossSpec(L.GENERAL, coefficients=(0.5, 1.0, 0.25)),
)

EXPANSION_SPECS = (
    L.LossSpec(L.CE),
    L.LossSpec(L.FOCAL, gamma=1.0),
    L.LossSpec(L.FOCAL, gamma=2.0),
    L.LossSpec(L.POLY1_CE, eps1=-1.0),
    L.LossSpec(L.POLY1_CE, eps1=0.0),
    L.LossSpec(L.POLY1_CE, eps1=2.0),
    L.LossSpec(L.POLY1_FL, eps1=-1.0, gamma=2.0),
    L.LossSpec(L.POLY1_STAR_FL, eps2=-0.4, gamma=2.0),
    L.LossSpec(L.POLY1_STAR_FL, eps2=0.2, gamma=2.0),
)

SCALAR_GRID = tuple(np.round(np.arange(1, 20) * 0.05, 10))


def scalar_inputs(seeds: int = 20) -> tuple[float, ...]:
    """The fixed grid plus ``seeds`` seeded uniform draws from [0.02, 0.98]."""
    draws = np.random.default_rng(0).uniform(0.02, 0.98, seeds)
    return SCALAR_GRID + tuple(float(v) for v in draws)


def describe_spec(spec: L.LossSpec) -> str:
    params = {k: v for k, v in spec.to_dict().items() if k != "family"}
    inner = ",".join(f"{k}={v}" for k, v in params.items())
    return f"{spec.family}({inner})"


@dataclass
class SuiteResult:
    name: str
    reports: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    equivalences: list = field(default_factory=list)
    controls: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (all(r.passed for r in self.reports)
                and all(r.passed for r in self.residuals)
                and all(e.passed for e in self.equivalences)
                and all(self.controls.values()))

    def failures(self) -> list:
        bad = [r for r in self.reports + self.residuals + self.equivalences if not r.passed]
        bad += [name for name, ok in self.controls.items() if not ok]
        return bad

    def merge(self, other: "SuiteResult") -> "SuiteResult":
        self.reports += other.reports
        self.residuals += other.residuals
        self.equivalences += other.equivalences
        self.controls.update(other.controls)
        return self


def theorem1_suite(cases=THEOREM1_CASES, grid_step: float = 0.01) -> SuiteResult:
    result = SuiteResult("theorem1")
    for zeta, delta in cases:
        result.residuals.append(S.verify_theorem1(zeta, delta, grid_step))
    return result


def scalar_gradient_cases(tolerance: float = 1e-5, specs=GRADIENT_SPECS,
                          h: float = O.DEFAULT_H, seeds: int = 20) -> list[O.CheckCase]:
    inputs = scalar_inputs(seeds)
    cases = []
    for spec in specs:
        cases.append(O.CheckCase(
            name=f"loss_grad_pt:{describe_spec(spec)}",
            primary=lambda p, s=spec: L.loss_grad_pt(s, p),
            oracle=lambda p, s=spec: O.finite_diff(lambda q: L.loss(s, q), p, h),
            inputs=inputs,
            tolerance=tolerance,
        ))
    return cases


def batch_pairs():
    """Every supported (batch kind, loss spec, alpha_balance) combination."""
    pairs = [(A.SOFTMAX, spec, None) for spec in GRADIENT_SPECS]
    pairs += [(A.SMOOTHED, L.LossSpec(L.CE), None),
              (A.SMOOTHED, L.LossSpec(L.POLY1_CE, eps1=2.0), None),
              (A.SMOOTHED, L.LossSpec(L.POLY1_CE, eps1=-1.0), None)]
    pairs += [(A.SIGMOID, spec, None) for spec in GRADIENT_SPECS]
    pairs.append((A.SIGMOID, L.LossSpec(L.POLY1_FL, eps1=-1.0, gamma=2.0), 0.25))
    pairs.append((A.SIGMOID, L.LossSpec(L.FOCAL, gamma=2.0), 0.25))
    return pairs


def random_batch(kind: str, seed: int, rows: int = 3, classes: int = 4) -> A.LabeledBatch:
    rng = np.random.default_rng(seed)
    logits = rng.normal(scale=1.5, size=(rows, classes))
    if kind == A.SIGMOID:
        labels = (rng.random((rows, classes)) < 0.4).astype(float)
        return A.LabeledBatch(logits, labels, kind)
    classes_ = rng.integers(0, classes, size=rows)
    smoothing = A.DEFAULT_SMOOTHING if kind == A.SMOOTHED else 0.0
    return A.LabeledBatch.from_classes(logits, classes_, kind, smoothing)


def batch_gradient_reports(tolerance: float = 1e-5, seeds: int = 20,
                           h: float = O.DEFAULT_H) -> list[O.OracleReport]:
    reports = []
    for kind, spec, alpha in batch_pairs():
        for seed in range(seeds):
            batch = random_batch(kind, seed)
            analytic = A.grad_logits(batch, spec, alpha)

            def f(z, b=batch, s=spec, a=alpha):
                return A.mean_loss(A.LabeledBatch(z, b.labels, b.kind, b.smoothing), s, a)

            numeric = O.finite_diff_array(f, batch.logits, h)
            worst = np.unravel_index(np.argmax(np.abs(analytic - numeric)), analytic.shape)
            tag = f"{kind}:{describe_spec(spec)}" + (f":alpha={alpha}" if alpha else "")
            reports.append(O.OracleReport.compare(
                f"grad_logits:{tag}", f"seed={seed} index={tuple(int(i) for i in worst)}",
                analytic[worst], numeric[worst], tolerance))
    return reports


def corrupted_gradient_detected(tolerance: float = 1e-5) -> bool:
    """Negative control: an off-by-one leading coefficient must be caught."""
    spec = L.LossSpec(L.POLY1_CE, eps1=2.0)
    case = O.CheckCase(
        name="corrupted",
        primary=lambda p: L.loss_grad_pt(spec, p) - 1.0,
        oracle=lambda p: O.finite_diff(lambda q: L.loss(spec, q), p),
        inputs=SCALAR_GRID,
        tolerance=tolerance,
    )
    return not O.all_passed(O.cross_check([case]))


def gradients_suite(tolerance: float = 1e-5, seeds: int = 20) -> SuiteResult:
    result = SuiteResult("gradients")
    result.reports += O.cross_check(scalar_gradient_cases(tolerance, seeds=seeds))
    result.reports += batch_gradient_reports(tolerance, seeds)
    result.controls["negative_control:corrupted_gradient"] = corrupted_gradient_detected(tolerance)
    return result


def oracle_rule(spec: L.LossSpec):
    f = spec.family
    if f == L.CE:
        return O.harmonic_rule
    if f == L.FOCAL:
        return O.focal_rule(int(spec.gamma))
    if f == L.POLY1_CE:
        return O.poly1_rule(spec.eps1)
    if f == L.POLY1_FL:
        return O.poly1_focal_rule(spec.eps1, int(spec.gamma))
    if f == L.POLY1_STAR_FL:
        return O.poly1_star_focal_rule(spec.eps2, int(spec.gamma))
    raise ValueError(f"no oracle rule for {f!r}")


def series_cases(tolerance: float = 0.01, specs=EXPANSION_SPECS, delta: float = 0.1):
    """Closed-form loss vs naive extended-precision series at the minimum residual horizon."""
    n = S.theorem1_min_n(tolerance, delta)
    grid = tuple(S.pt_grid(delta))
    cases = []
    for spec in specs:
        shift = int(spec.gamma) if spec.family in (L.FOCAL, L.POLY1_FL, L.POLY1_STAR_FL) else 0
        rule = oracle_rule(spec)
        cases.append(O.CheckCase(
            name=f"series:{describe_spec(spec)}",
            primary=lambda p, s=spec: L.loss(s, p),
            oracle=lambda p, r=rule, hz=n + shift: O.brute_series(r, p, hz),
            inputs=grid,
            tolerance=tolerance,
        ))
    return cases


def reference_cases(tolerance: float = 1e-12, specs=EXPANSION_SPECS):
    """Closed-form loss vs a 50-digit mpmath evaluation."""
    grid = tuple(S.pt_grid(0.05, 1.0, 0.05))
    cases = []
    for spec in specs:
        kw = {"gamma": spec.gamma, "eps1": spec.eps1, "eps2": spec.eps2}
        cases.append(O.CheckCase(
            name=f"reference:{describe_spec(spec)}",
            primary=lambda p, s=spec: L.loss(s, p),
            oracle=lambda p, s=spec, k=kw: O.reference_loss(s.family, p, **k),
            inputs=grid,
            tolerance=tolerance,
        ))
    return cases


def corrupted_series_detected(tolerance: float = 0.01) -> bool:
    """Negative control: CE checked against an off-by-one harmonic series."""
    n = S.theorem1_min_n(tolerance, 0.1)
    case = O.CheckCase("corrupted", lambda p: L.ce_loss(p),
                       lambda p: O.brute_series(lambda j: 1.0 / (j + 1), p, n),
                       tuple(S.pt_grid(0.1)), tolerance)
    return not O.all_passed(O.cross_check([case]))


def expansion_suite(tolerance: float = 0.01) -> SuiteResult:
    result = SuiteResult("expansion")
    for spec in EXPANSION_SPECS:
        result.equivalences.append(S.expansion_equivalence(spec, None, tolerance))
    result.reports += O.cross_check(series_cases(tolerance))
    result.reports += O.cross_check(reference_cases(min(tolerance, 1e-12)))
    result.controls["negative_control:corrupted_series"] = corrupted_series_detected(tolerance)
    return result


def run_suite(name: str, tolerance: float | None = None, zeta: float | None = None,
              delta: float | None = None, grid_step: float = 0.01, seeds: int = 20) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    result = SuiteResult(name)
    if name in ("theorem1", "all"):
        if zeta is not None or delta is not None:
            cases = ((zeta if zeta is not None else 0.01, delta if delta is not None else 0.1),)
        elif tolerance is not None:
            cases = ((tolerance, 0.1),)
        else:
            cases = THEOREM1_CASES
        result.merge(theorem1_suite(cases, grid_step))
    if name in ("gradients", "all"):
        result.merge(gradients_suite(1e-5 if tolerance is None else tolerance, seeds))
    if name in ("expansion", "all"):
        result.merge(expansion_suite(0.01 if tolerance is None else tolerance))
    return result
