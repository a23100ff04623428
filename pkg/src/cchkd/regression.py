"""Closed-form teacher and distilled-student estimators.

The distillation objective

    sum_i (y_i - w^T x2_i)^2 + lam * sum_i (w^T x2_i - w1^T x1_i)^2

is ordinary least squares on the effective label
``ybar_i = (y_i + lam * w1^T x1_i) / (1 + lam)``, so both regimes reduce to a
single linear solve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .gaussian_model import Dataset, PopulationModel

__all__ = [
    "RankDeficientError",
    "RegimeError",
    "TeacherSource",
    "Regime",
    "TeacherWeights",
    "StudentEstimate",
    "cholesky_solve",
    "teacher_admissibility",
    "fit_teacher_population",
    "fit_teacher_empirical",
    "effective_labels",
    "fit_student_ls",
    "fit_student_minnorm",
    "fit_student",
    "excess_risk_population",
    "excess_risk_empirical",
    "holdout_mse",
]


class RankDeficientError(np.linalg.LinAlgError):
    """A Gram matrix could not be factorized even after jitter."""


class RegimeError(ValueError):
    """The sample size is on the wrong side of p for the requested estimator."""


class TeacherSource(str, enum.Enum):
    POPULATION_OPTIMAL = "population_optimal"
    EMPIRICAL_LS = "empirical_ls"
    EXPLICIT = "explicit"


class Regime(str, enum.Enum):
    LEAST_SQUARES = "least_squares"
    MIN_NORM = "min_norm"


@dataclass(frozen=True)
class TeacherWeights:
    w1: np.ndarray
    source: TeacherSource = TeacherSource.EXPLICIT
    # None when admissibility was not evaluated (no population model at hand).
    admissible: bool | None = None

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=float)
        if w1.ndim != 1 or not np.all(np.isfinite(w1)):
            raise ValueError("teacher weights must be a finite vector")
        w1.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "source", TeacherSource(self.source))


@dataclass(frozen=True)
class StudentEstimate:
    w_hat: np.ndarray
    lam: float
    regime: Regime


def cholesky_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``gram @ x = rhs`` for a symmetric positive definite ``gram``.

    On factorization failure a single jitter of ``1e-10 * trace / dim`` is
    added to the diagonal; failing again raises :class:`RankDeficientError`.
    """
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError:
        dim = gram.shape[0]
        jitter = 1e-10 * np.trace(gram) / dim
        try:
            factor = linalg.cho_factor(gram + jitter * np.eye(dim), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise RankDeficientError("Gram matrix is singular even after jitter") from exc
    return linalg.cho_solve(factor, rhs, check_finite=False)


def teacher_admissibility(model: PopulationModel, w1: np.ndarray) -> tuple[float, float, bool]:
    """Return ``(w1' S11 w1, w1' S13, admissible)``.

    Admissible teachers are not too large (``w1' S11 w1 <= S33``) and not
    misleading (``w1' S13 >= 0``).
    """
    quad = float(w1 @ model.Sigma11 @ w1)
    align = float(w1 @ model.Sigma13)
    tol = 1e-12 * max(1.0, model.Sigma33)
    return quad, align, bool(quad <= model.Sigma33 + tol and align >= -tol)


def fit_teacher_population(model: PopulationModel) -> TeacherWeights:
    """Population-optimal teacher ``Sigma11^{-1} Sigma13``."""
    try:
        w1 = linalg.solve(model.Sigma11, model.Sigma13, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise RankDeficientError("Sigma11 is singular") from exc
    _, _, ok = teacher_admissibility(model, w1)
    return TeacherWeights(w1, TeacherSource.POPULATION_OPTIMAL, admissible=ok)


def fit_teacher_empirical(dataset: Dataset) -> TeacherWeights:
    """Least-squares regression of ``y`` on the teacher inputs."""
    x1 = dataset.x1
    n, p = x1.shape
    if n <= p:
        raise RegimeError(f"empirical teacher needs n > p, got n={n}, p={p}")
    w1 = cholesky_solve(x1.T @ x1, x1.T @ dataset.y)
    return TeacherWeights(w1, TeacherSource.EMPIRICAL_LS)


def effective_labels(dataset: Dataset, teacher: TeacherWeights, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        return np.array(dataset.y)
    return (dataset.y + lam * (dataset.x1 @ teacher.w1)) / (1.0 + lam)


def fit_student_ls(dataset: Dataset, teacher: TeacherWeights, lam: float) -> StudentEstimate:
    """Distilled student in the underparameterized regime (``n > p``)."""
    x2 = dataset.x2
    n, p = x2.shape
    if n <= p:
        raise RegimeError(f"least-squares student needs n > p, got n={n}, p={p}")
    ybar = effective_labels(dataset, teacher, lam)
    w_hat = cholesky_solve(x2.T @ x2, x2.T @ ybar)
    return StudentEstimate(w_hat, float(lam), Regime.LEAST_SQUARES)


def fit_student_minnorm(dataset: Dataset, teacher: TeacherWeights, lam: float) -> StudentEstimate:
    """Minimum-norm interpolator of the effective labels (``n < p``)."""
    x2 = dataset.x2
    n, p = x2.shape
    if n >= p:
        raise RegimeError(f"min-norm student needs n < p, got n={n}, p={p}")
    ybar = effective_labels(dataset, teacher, lam)
    alpha = cholesky_solve(x2 @ x2.T, ybar)
    return StudentEstimate(x2.T @ alpha, float(lam), Regime.MIN_NORM)


def fit_student(dataset: Dataset, teacher: TeacherWeights, lam: float) -> StudentEstimate:
    """Dispatch on ``n`` versus ``p``."""
    if dataset.n > dataset.p:
        return fit_student_ls(dataset, teacher, lam)
    return fit_student_minnorm(dataset, teacher, lam)


def excess_risk_population(estimate: StudentEstimate, model: PopulationModel) -> float:
    """``(w_hat - w*)' Sigma22 (w_hat - w*)``."""
    if estimate.w_hat.shape != model.w_star.shape:
        raise ValueError("estimate and model dimensions differ")
    d = estimate.w_hat - model.w_star
    return max(float(d @ model.Sigma22 @ d), 0.0)


def holdout_mse(estimate: StudentEstimate, test: Dataset) -> float:
    if estimate.w_hat.shape[0] != test.p:
        raise ValueError("estimate and test set dimensions differ")
    resid = test.y - test.x2 @ estimate.w_hat
    return float(resid @ resid) / test.n


def excess_risk_empirical(estimate: StudentEstimate, test: Dataset, model: PopulationModel) -> float:
    """Held-out MSE minus the irreducible noise variance."""
    if model.p != test.p:
        raise ValueError("model and test set dimensions differ")
    return holdout_mse(estimate, test) - model.noise_var
