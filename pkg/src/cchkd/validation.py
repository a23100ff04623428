"""Monte-Carlo checks of the closed-form risk and the CCH small-lambda claim."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import (
    AsymptoticContext,
    asymptotic_risk_over,
    asymptotic_risk_under,
    cch_mi_gap,
    small_lambda_condition,
    small_lambda_slope,
    solve_tau,
)
from .gaussian_model import CorrelationSpec, derive_population_model, sample_dataset, validate_feasibility
from .regression import (
    TeacherSource,
    TeacherWeights,
    excess_risk_population,
    fit_student_ls,
    fit_student_minnorm,
    fit_teacher_population,
    teacher_admissibility,
)

__all__ = [
    "CCH_GRID_SEED",
    "FD_STEP",
    "CheckResult",
    "RiskAgreement",
    "GridPoint",
    "mc_risk_agreement",
    "mc_minnorm_agreement",
    "cch_grid",
    "cch_violations",
    "run_validation",
]

CCH_GRID_SEED = 2025
FD_STEP = 1e-5
FIG1_SPEC = CorrelationSpec(0.5, 0.9, 0.4, 100)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class RiskAgreement:
    theory: float
    mc_mean: float
    mc_se: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.mc_mean - self.theory) <= self.tolerance

    @property
    def rel_error(self) -> float:
        return abs(self.mc_mean - self.theory) / self.theory


def mc_risk_agreement(spec: CorrelationSpec, lam: float, n: int, seeds, rel_tol: float = 0.10,
                      n_se: float | None = 3.0) -> RiskAgreement:
    """Mean population excess risk of the least-squares student versus the limit.

    Tolerance is ``max(rel_tol * theory, n_se * SE)``; pass ``n_se=None``
    for a purely relative tolerance.
    """
    model = derive_population_model(spec)
    teacher = fit_teacher_population(model)
    theory = asymptotic_risk_under(AsymptoticContext(model, n / spec.p, teacher, lam)).total
    risks = np.array([
        excess_risk_population(fit_student_ls(sample_dataset(spec, n, s), teacher, lam), model)
        for s in seeds
    ])
    se = float(risks.std(ddof=1) / math.sqrt(risks.size)) if risks.size > 1 else math.inf
    tol = rel_tol * theory if n_se is None else max(rel_tol * theory, n_se * se)
    return RiskAgreement(theory, float(risks.mean()), se, tol)


def mc_minnorm_agreement(spec: CorrelationSpec, n: int, seeds, lam: float = 0.0,
                         teacher: TeacherWeights | None = None, rel_tol: float = 0.10) -> RiskAgreement:
    """Same comparison in the overparameterized regime (``n < p``)."""
    model = derive_population_model(spec)
    if teacher is None:
        teacher = TeacherWeights(np.zeros(spec.p), TeacherSource.EXPLICIT)
    theory = asymptotic_risk_over(AsymptoticContext(model, n / spec.p, teacher, lam)).total
    risks = np.array([
        excess_risk_population(fit_student_minnorm(sample_dataset(spec, n, s), teacher, lam), model)
        for s in seeds
    ])
    se = float(risks.std(ddof=1) / math.sqrt(risks.size))
    return RiskAgreement(theory, float(risks.mean()), se, rel_tol * theory)


@dataclass(frozen=True)
class GridPoint:
    spec: CorrelationSpec
    teacher: TeacherWeights
    gap: float
    lhs: float
    beneficial: bool
    slope_analytic: float
    slope_fd: float

    @property
    def cch_holds(self) -> bool:
        return self.gap <= 0 or self.beneficial

    @property
    def slope_signs_agree(self) -> bool:
        return np.sign(self.slope_analytic) == np.sign(self.slope_fd)


def _random_admissible_teacher(model, rng: np.random.Generator) -> TeacherWeights:
    base = fit_teacher_population(model).w1
    if rng.random() < 0.5:
        w1 = base
    else:
        w1 = base + rng.normal(scale=np.abs(base).mean() + 0.1, size=base.shape)
    quad, align, _ = teacher_admissibility(model, w1)
    if align < 0:
        w1 = -w1
    if quad > model.Sigma33:
        w1 = w1 * math.sqrt(model.Sigma33 / quad) * rng.uniform(0.3, 0.999)
    return TeacherWeights(w1, TeacherSource.EXPLICIT, admissible=teacher_admissibility(model, w1)[2])


def cch_grid(n_points: int = 20, seed: int = CCH_GRID_SEED, kappa: float = 10.0) -> list[GridPoint]:
    """Random feasible specs with admissible teachers, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_points:
        s12, s13, s23 = rng.uniform(-0.9, 0.9, size=3)
        if abs(s23) < 0.05:
            continue
        spec = CorrelationSpec(float(s12), float(s13), float(s23), int(rng.integers(1, 9)))
        if validate_feasibility(spec).v < 0.01:
            continue
        model = derive_population_model(spec)
        teacher = _random_admissible_teacher(model, rng)
        if not teacher.admissible or float(teacher.w1 @ model.Sigma11 @ teacher.w1) <= 0:
            continue
        cond = small_lambda_condition(model, teacher)
        h = FD_STEP
        r_hi = asymptotic_risk_under(AsymptoticContext(model, kappa, teacher, 2 * h)).total
        r_lo = asymptotic_risk_under(AsymptoticContext(model, kappa, teacher, 0.0)).total
        out.append(GridPoint(
            spec=spec,
            teacher=teacher,
            gap=cch_mi_gap(model, teacher).gap,
            lhs=cond.lhs,
            beneficial=cond.beneficial,
            slope_analytic=small_lambda_slope(model, teacher, kappa),
            slope_fd=(r_hi - r_lo) / (2 * h),
        ))
    return out


def cch_violations(points: list[GridPoint]) -> list[GridPoint]:
    return [pt for pt in points if not (pt.cch_holds and pt.slope_signs_agree)]


def run_validation(quick: bool = False) -> list[CheckResult]:
    """The Monte-Carlo agreement suite and the CCH grid check."""
    results = []
    seeds = range(10)
    base = mc_risk_agreement(FIG1_SPEC, 0.0, 10_000, seeds, n_se=None)
    results.append(CheckResult(
        "baseline OLS risk = sigma^2/(kappa-1)", base.passed,
        f"theory={base.theory:.4e} mc={base.mc_mean:.4e} rel.err={base.rel_error:.3f}"))

    points = [(0.5, 0.5)] if quick else [(s, l) for s in (0.2, 0.5, 0.7) for l in (0.2, 0.5)]
    n_seeds = 10 if quick else 20
    for s12, lam in points:
        agr = mc_risk_agreement(FIG1_SPEC.with_sigma12(s12), lam, 10_000, range(n_seeds))
        results.append(CheckResult(
            f"MC vs limit, sigma12={s12} lambda={lam}", agr.passed,
            f"theory={agr.theory:.4e} mc={agr.mc_mean:.4e}+-{agr.mc_se:.1e} tol={agr.tolerance:.1e}"))

    grid = cch_grid()
    bad = cch_violations(grid)
    n_pos = sum(pt.gap > 0 for pt in grid)
    results.append(CheckResult(
        "CCH grid (gap>0 => beneficial, slope signs)", not bad,
        f"{len(grid)} points, {n_pos} with positive gap, {len(bad)} violations"))

    tau = solve_tau(np.eye(50), 0.5)
    results.append(CheckResult("isotropic tau = (1-kappa)/kappa", abs(tau - 1.0) < 1e-10, f"tau={tau:.12f}"))

    if not quick:
        over = mc_minnorm_agreement(CorrelationSpec(0.5, 0.5, 0.0, 400), 200, range(20))
        results.append(CheckResult(
            "min-norm MC vs limit, kappa=0.5", over.passed,
            f"theory={over.theory:.4f} mc={over.mc_mean:.4f} rel.err={over.rel_error:.3f}"))
    return results
