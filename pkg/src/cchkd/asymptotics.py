"""Proportional-limit risk of the distilled student and the CCH criterion.

All formulas take a :class:`PopulationModel` and a teacher weight ``w1``.
``sigma^2 = Sigma33 - w*' Sigma22 w*`` is the residual label variance given
the student modality, with ``w* = Sigma22^{-1} Sigma23``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .gaussian_model import PopulationModel
from .mi import gaussian_mi
from .regression import TeacherSource, TeacherWeights

__all__ = [
    "InconsistentModelError",
    "RiskRegime",
    "AsymptoticContext",
    "RiskBreakdown",
    "SmallLambdaCondition",
    "CchCorrelations",
    "MiGap",
    "w_bar",
    "sigma_bar_sq",
    "asymptotic_risk_under",
    "asymptotic_risk_over",
    "asymptotic_risk",
    "optimal_teacher_weight",
    "conditional_independence_teacher",
    "small_lambda_condition",
    "small_lambda_slope",
    "cch_correlations",
    "cch_mi_gap",
    "cch_verdict",
    "solve_tau",
]


class InconsistentModelError(ValueError):
    """A derived quantity left its admissible range."""


class RiskRegime(str, enum.Enum):
    UNDER = "under"
    OVER = "over"


@dataclass(frozen=True)
class AsymptoticContext:
    model: PopulationModel
    kappa: float
    teacher: TeacherWeights
    lam: float

    def __post_init__(self):
        if not self.kappa > 0 or self.kappa == 1:
            raise ValueError(f"kappa={self.kappa!r} must be positive and different from 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.teacher.w1.shape != (self.model.p,):
            raise ValueError("teacher dimension does not match the model")


@dataclass(frozen=True)
class RiskBreakdown:
    w_bar: np.ndarray
    sigma_bar_sq: float
    bias_term: float
    variance_term: float
    total: float
    regime: RiskRegime
    tau: float | None = None
    omega: float | None = None


@dataclass(frozen=True)
class SmallLambdaCondition:
    lhs: float
    beneficial: bool


@dataclass(frozen=True)
class CchCorrelations:
    rho_t_s: float
    rho_t_y: float
    rho_s_y: float


@dataclass(frozen=True)
class MiGap:
    i_ts: float
    i_sy: float
    gap: float


def _solve22(model: PopulationModel, rhs: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(model.Sigma22, rhs, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise InconsistentModelError("Sigma22 is singular") from exc


def _teacher_moments(model: PopulationModel, w1: np.ndarray) -> tuple[float, float]:
    """``(w1'(S13 - S12 w*), w1'(S11 - S12 S22^{-1} S12') w1)``."""
    w_star = model.w_star
    cross = float(w1 @ (model.Sigma13 - model.Sigma12 @ w_star))
    proj = model.Sigma12.T @ w1
    resid = float(w1 @ model.Sigma11 @ w1 - proj @ _solve22(model, proj))
    return cross, resid


def w_bar(model: PopulationModel, teacher: TeacherWeights, lam: float) -> np.ndarray:
    """Population regression coefficient of the effective label on ``x2``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    rhs = model.Sigma23 + lam * (model.Sigma12.T @ teacher.w1)
    return _solve22(model, rhs) / (1.0 + lam)


def sigma_bar_sq(model: PopulationModel, teacher: TeacherWeights, lam: float) -> float:
    """Residual variance of the effective label given ``x2``."""
    w1 = teacher.w1
    second_moment = (model.Sigma33 + 2 * lam * float(w1 @ model.Sigma13)
                     + lam * lam * float(w1 @ model.Sigma11 @ w1)) / (1.0 + lam) ** 2
    wb = w_bar(model, teacher, lam)
    out = second_moment - float(wb @ model.Sigma22 @ wb)
    if out < -1e-10:
        raise InconsistentModelError(f"effective-label residual variance is negative ({out:.3e})")
    return max(out, 0.0)


def asymptotic_risk_under(ctx: AsymptoticContext) -> RiskBreakdown:
    """Limiting excess risk of the least-squares student for ``kappa > 1``."""
    if not ctx.kappa > 1:
        raise ValueError(f"underparameterized risk needs kappa > 1, got {ctx.kappa}")
    model, lam, w1 = ctx.model, ctx.lam, ctx.teacher.w1
    d = _solve22(model, model.Sigma12.T @ w1) - model.w_star
    shrink = lam / (1.0 + lam)
    bias = shrink * shrink * float(d @ model.Sigma22 @ d)
    cross, resid = _teacher_moments(model, w1)
    numer = model.noise_var + 2 * lam * cross + lam * lam * resid
    variance = numer / ((ctx.kappa - 1.0) * (1.0 + lam) ** 2)
    sbar = max(numer / (1.0 + lam) ** 2, 0.0)
    return RiskBreakdown(
        w_bar=w_bar(model, ctx.teacher, lam),
        sigma_bar_sq=sbar,
        bias_term=max(bias, 0.0),
        variance_term=max(variance, 0.0),
        total=max(bias, 0.0) + max(variance, 0.0),
        regime=RiskRegime.UNDER,
    )


def optimal_teacher_weight(model: PopulationModel, kappa: float, lam: float) -> TeacherWeights:
    """Teacher weight minimizing the ``kappa > 1`` limiting risk at fixed ``lam``."""
    if not kappa > 1:
        raise ValueError("optimal teacher weight is defined for kappa > 1")
    if not lam > 0:
        raise ValueError("optimal teacher weight needs lambda > 0")
    s12 = model.Sigma12
    explained = s12 @ _solve22(model, s12.T)
    c = 1.0 / (kappa - 1.0)
    system = lam * (explained + c * (model.Sigma11 - explained))
    rhs = lam * (s12 @ model.w_star) - c * (model.Sigma13 - s12 @ model.w_star)
    try:
        w1 = linalg.solve(system, rhs, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise InconsistentModelError("optimal-teacher system is singular") from exc
    return TeacherWeights(w1, TeacherSource.EXPLICIT)


def conditional_independence_teacher(model: PopulationModel, kappa: float) -> np.ndarray:
    """Closed form of the optimal teacher when ``x1`` and ``y`` are independent given ``x2``."""
    s12 = model.Sigma12
    explained = s12 @ _solve22(model, s12.T)
    return (kappa - 1.0) * linalg.solve(model.Sigma11 + (kappa - 2.0) * explained,
                                        s12 @ model.w_star)


def small_lambda_condition(model: PopulationModel, teacher: TeacherWeights) -> SmallLambdaCondition:
    """Sign test for a first-order risk decrease when ``lam`` leaves zero."""
    cross, _ = _teacher_moments(model, teacher.w1)
    lhs = cross - model.noise_var
    return SmallLambdaCondition(lhs=lhs, beneficial=bool(lhs < 0))


def small_lambda_slope(model: PopulationModel, teacher: TeacherWeights, kappa: float) -> float:
    """Derivative of the ``kappa > 1`` risk with respect to ``lam`` at zero."""
    return 2.0 * small_lambda_condition(model, teacher).lhs / (kappa - 1.0)


def cch_correlations(model: PopulationModel, teacher: TeacherWeights) -> CchCorrelations:
    """Correlations among ``w1'x1``, ``w*'x2`` and ``y``."""
    w1, w_star = teacher.w1, model.w_star
    var_t = float(w1 @ model.Sigma11 @ w1)
    var_s = float(w_star @ model.Sigma22 @ w_star)
    if not (var_t > 0 and var_s > 0):
        raise InconsistentModelError("a projected representation has zero variance")
    sd_t, sd_s, sd_y = math.sqrt(var_t), math.sqrt(var_s), math.sqrt(model.Sigma33)
    clip = lambda r: float(min(1.0, max(-1.0, r)))  # noqa: E731
    return CchCorrelations(
        rho_t_s=clip(float(w1 @ model.Sigma12 @ w_star) / (sd_t * sd_s)),
        rho_t_y=clip(float(w1 @ model.Sigma13) / (sd_t * sd_y)),
        rho_s_y=clip(sd_s / sd_y),
    )


def _gaussian_mi(rho: float) -> float:
    try:
        return gaussian_mi(rho)
    except ValueError as exc:
        raise InconsistentModelError("perfectly correlated projections have infinite mutual information") from exc


def cch_mi_gap(model: PopulationModel, teacher: TeacherWeights) -> MiGap:
    """``I(w1'x1; w*'x2) - I(w*'x2; y)`` in nats."""
    corr = cch_correlations(model, teacher)
    i_ts = _gaussian_mi(corr.rho_t_s)
    i_sy = _gaussian_mi(corr.rho_s_y)
    return MiGap(i_ts=i_ts, i_sy=i_sy, gap=i_ts - i_sy)


def cch_verdict(model: PopulationModel, teacher: TeacherWeights) -> str:
    """``"beneficial"``, ``"not_beneficial"`` or ``"indeterminate"``.

    Indeterminate when either projection is degenerate (for example a
    student modality uncorrelated with the label).
    """
    try:
        gap = cch_mi_gap(model, teacher).gap
    except InconsistentModelError:
        return "indeterminate"
    return "beneficial" if gap > 0 else "not_beneficial"


def _trace_ratio(eigs: np.ndarray, tau: float) -> float:
    return float(np.mean(eigs / (eigs + tau)))


def solve_tau(Sigma22: np.ndarray, kappa: float, bracket: tuple[float, float] | None = None) -> float:
    """Positive root of ``kappa = tr((Sigma22 + tau I)^{-1} Sigma22) / p``.

    The right-hand side decreases strictly in ``tau``, so plain bisection
    converges to the unique root.
    """
    if not 0 < kappa < 1:
        raise ValueError(f"kappa={kappa!r} must lie in (0, 1)")
    eigs = np.linalg.eigvalsh(np.asarray(Sigma22, dtype=float))
    if eigs[0] <= 0:
        raise InconsistentModelError("Sigma22 must be positive definite")
    return _bisect_tau(eigs, kappa, bracket)


def _bisect_tau(eigs: np.ndarray, kappa: float, bracket=None) -> float:
    f = lambda t: _trace_ratio(eigs, t) - kappa  # noqa: E731
    if bracket is None:
        lo, hi = 0.0, float(eigs[-1])
        while f(hi) > 0:
            hi *= 2.0
    else:
        lo, hi = map(float, bracket)
        if not (f(lo) > 0 > f(hi)):
            raise ValueError(f"bracket {bracket} does not straddle the root")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def asymptotic_risk_over(ctx: AsymptoticContext) -> RiskBreakdown:
    """Limiting excess risk of the minimum-norm student for ``kappa < 1``.

    The bias/variance split reports the two noise-free quadratic terms
    (with the cross term folded into the bias) and the ``Omega`` term.
    """
    if not ctx.kappa < 1:
        raise ValueError(f"overparameterized risk needs kappa < 1, got {ctx.kappa}")
    model, lam, w1 = ctx.model, ctx.lam, ctx.teacher.w1
    p = model.p
    n = ctx.kappa * p
    eigs, vecs = np.linalg.eigh(model.Sigma22)
    if eigs[0] <= 0:
        raise InconsistentModelError("Sigma22 must be positive definite")
    tau = _bisect_tau(eigs, ctx.kappa)
    omega = float(np.sum(eigs ** 2 / (eigs + tau) ** 2)) / n
    if not 0 < omega < 1:
        raise InconsistentModelError(f"Omega={omega} outside (0, 1)")

    sigma_sq = model.noise_var
    cross, resid = _teacher_moments(model, w1)
    sbar_sq = max((sigma_sq + 2 * lam * cross + lam * lam * resid) / (1.0 + lam) ** 2, 0.0)
    # r = sbar / sigma; every occurrence of w_s = w_bar / r appears multiplied by r.
    r = math.sqrt(sbar_sq / sigma_sq) if sigma_sq > 0 else 1.0
    wb = w_bar(model, ctx.teacher, lam)

    # Work in the eigenbasis of Sigma22.
    wbe = vecs.T @ wb
    wst = vecs.T @ model.w_star
    scaled_gap = wbe - r * wst  # r * (w_s - w*)
    shifted = eigs + tau
    bias_main = float(np.sum(eigs ** 3 / shifted ** 2 * scaled_gap ** 2))
    var_term = omega * (sbar_sq + tau * tau * float(np.sum(eigs * wbe ** 2 / shifted ** 2))) / (1 - omega)
    mixed = shifted - r * eigs
    cross_term = -2.0 * float(np.sum(wst * eigs ** 2 / shifted ** 2 * mixed * scaled_gap))
    residual_bias = float(np.sum(wst ** 2 * mixed ** 2 / shifted ** 2 * eigs))
    bias = bias_main + cross_term + residual_bias
    return RiskBreakdown(
        w_bar=wb,
        sigma_bar_sq=sbar_sq,
        bias_term=bias,
        variance_term=var_term,
        total=bias + var_term,
        regime=RiskRegime.OVER,
        tau=tau,
        omega=omega,
    )


def asymptotic_risk(ctx: AsymptoticContext) -> RiskBreakdown:
    if ctx.kappa > 1:
        return asymptotic_risk_under(ctx)
    return asymptotic_risk_over(ctx)
