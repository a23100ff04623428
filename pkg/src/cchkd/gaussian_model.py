"""Jointly Gaussian teacher/student/label model.

Samples are generated by the three-stage conditional scheme

    Y            ~ N(0, 1)
    X2 | Y       ~ N(s23 * Y * 1_p, (1 - s23^2) I_p)
    X1 | X2, Y   ~ N(a X2 + b Y 1_p, v I_p)

with ``phi = 1 - s23^2``, ``a = (s12 - s13 s23) / phi``,
``b = (s13 - s12 s23) / phi`` and
``v = 1 - (s12^2 + s13^2 - 2 s12 s13 s23) / phi``.

Because the scalar label is broadcast to every coordinate, the implied
covariance blocks are "identity plus all-ones" matrices rather than pure
multiples of the identity.  :func:`derive_population_model` returns them
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "FEASIBILITY_TOL",
    "InfeasibleSpecError",
    "CorrelationSpec",
    "PopulationModel",
    "Dataset",
    "FeasibilityReport",
    "scheme_coefficients",
    "validate_feasibility",
    "derive_population_model",
    "noisy_population_model",
    "sample_dataset",
    "apply_teacher_noise",
]

# v must exceed this for the joint covariance to be treated as positive definite.
FEASIBILITY_TOL = 1e-10


class InfeasibleSpecError(ValueError):
    """Raised when three correlations do not define a valid joint Gaussian."""


@dataclass(frozen=True)
class CorrelationSpec:
    sigma12: float
    sigma13: float
    sigma23: float
    p: int

    def __post_init__(self):
        for name in ("sigma12", "sigma13", "sigma23"):
            val = getattr(self, name)
            if not np.isfinite(val) or not -1.0 < val < 1.0:
                raise ValueError(f"{name}={val!r} must lie strictly inside (-1, 1)")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p={self.p!r} must be a positive integer")
        object.__setattr__(self, "p", int(self.p))

    def with_sigma12(self, sigma12: float) -> "CorrelationSpec":
        return replace(self, sigma12=float(sigma12))


@dataclass(frozen=True)
class PopulationModel:
    """Covariance blocks of ``(x1, x2, y)`` plus the derived student optimum.

    ``Sigma12`` is ``Cov(x1, x2)``; ``Sigma13`` and ``Sigma23`` are the
    covariances of each modality with the scalar label.
    """

    Sigma11: np.ndarray
    Sigma12: np.ndarray
    Sigma13: np.ndarray
    Sigma22: np.ndarray
    Sigma23: np.ndarray
    Sigma33: float
    w_star: np.ndarray = field(default=None)
    noise_var: float = field(default=None)

    def __post_init__(self):
        arrays = {}
        for name in ("Sigma11", "Sigma12", "Sigma13", "Sigma22", "Sigma23"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        p = arrays["Sigma22"].shape[0]
        if arrays["Sigma11"].shape != (p, p) or arrays["Sigma12"].shape != (p, p):
            raise ValueError("Sigma11, Sigma12, Sigma22 must all be p x p")
        if arrays["Sigma13"].shape != (p,) or arrays["Sigma23"].shape != (p,):
            raise ValueError("Sigma13 and Sigma23 must be p-vectors")
        object.__setattr__(self, "Sigma33", float(self.Sigma33))
        if self.w_star is None:
            w_star = np.linalg.solve(arrays["Sigma22"], arrays["Sigma23"])
        else:
            w_star = np.array(self.w_star, dtype=float)
        w_star.setflags(write=False)
        object.__setattr__(self, "w_star", w_star)
        if self.noise_var is None:
            noise_var = self.Sigma33 - float(arrays["Sigma23"] @ w_star)
            if noise_var < -1e-10:
                raise ValueError(f"negative residual label variance {noise_var:.3e}")
            object.__setattr__(self, "noise_var", max(noise_var, 0.0))

    @property
    def p(self) -> int:
        return self.Sigma22.shape[0]

    def joint_covariance(self) -> np.ndarray:
        """Assemble the ``(2p+1) x (2p+1)`` covariance of ``(x1, x2, y)``."""
        p = self.p
        out = np.empty((2 * p + 1, 2 * p + 1))
        out[:p, :p] = self.Sigma11
        out[:p, p:2 * p] = self.Sigma12
        out[p:2 * p, :p] = self.Sigma12.T
        out[p:2 * p, p:2 * p] = self.Sigma22
        out[:p, -1] = out[-1, :p] = self.Sigma13
        out[p:2 * p, -1] = out[-1, p:2 * p] = self.Sigma23
        out[-1, -1] = self.Sigma33
        return out


@dataclass(frozen=True)
class Dataset:
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    seed: int
    spec: CorrelationSpec
    teacher_noise: float = 0.0

    def __post_init__(self):
        n = self.y.shape[0]
        if self.y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        if self.x1.shape[0] != n or self.x2.shape[0] != n:
            raise ValueError("x1, x2 and y must share the sample count")
        if self.x1.shape[1] != self.x2.shape[1]:
            raise ValueError("x1 and x2 must share the dimension p")
        for arr in (self.x1, self.x2, self.y):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x2.shape[1]


@dataclass(frozen=True)
class FeasibilityReport:
    phi: float
    a: float
    b: float
    v: float
    psd: bool
    feasible: bool

    def describe(self) -> str:
        status = "feasible" if self.feasible else "INFEASIBLE"
        return (f"{status}: v={self.v:.6g} phi={self.phi:.6g} a={self.a:.6g} "
                f"b={self.b:.6g} joint covariance {'is' if self.psd else 'is not'} positive definite")


def scheme_coefficients(spec: CorrelationSpec) -> tuple[float, float, float, float]:
    """Return ``(phi, a, b, v)`` of the conditional sampling scheme."""
    s12, s13, s23 = spec.sigma12, spec.sigma13, spec.sigma23
    phi = 1.0 - s23 * s23
    a = (s12 - s13 * s23) / phi
    b = (s13 - s12 * s23) / phi
    v = 1.0 - (s12 * s12 + s13 * s13 - 2.0 * s12 * s13 * s23) / phi
    return phi, a, b, v


def _blocks(spec: CorrelationSpec, v: float):
    phi, a, b, _ = scheme_coefficients(spec)
    p = spec.p
    s13, s23 = spec.sigma13, spec.sigma23
    eye = np.eye(p)
    ones = np.ones((p, p))
    sigma22 = phi * eye + s23 * s23 * ones
    # Cov(x1, x2) = a Sigma22 + b s23 J
    sigma12 = a * phi * eye + s23 * s13 * ones
    sigma11 = (a * a * phi + v) * eye + (a * a * s23 * s23 + 2 * a * b * s23 + b * b) * ones
    sigma13 = np.full(p, s13)
    sigma23 = np.full(p, s23)
    return sigma11, sigma12, sigma13, sigma22, sigma23


def validate_feasibility(spec: CorrelationSpec) -> FeasibilityReport:
    """Diagnose whether ``spec`` defines a non-degenerate joint Gaussian."""
    phi, a, b, v = scheme_coefficients(spec)
    s11, s12, s13, s22, s23 = _blocks(spec, v)
    model = PopulationModel(s11, s12, s13, s22, s23, 1.0, w_star=np.zeros(spec.p), noise_var=0.0)
    try:
        np.linalg.cholesky(model.joint_covariance())
        psd = True
    except np.linalg.LinAlgError:
        psd = False
    return FeasibilityReport(phi=phi, a=a, b=b, v=v, psd=psd, feasible=bool(v > FEASIBILITY_TOL))


def _require_feasible(spec: CorrelationSpec) -> tuple[float, float, float, float]:
    phi, a, b, v = scheme_coefficients(spec)
    if not v > FEASIBILITY_TOL:
        raise InfeasibleSpecError(
            f"sigma12={spec.sigma12}, sigma13={spec.sigma13}, sigma23={spec.sigma23} "
            f"give residual variance v={v:.6g} <= 0; the joint covariance is not positive definite"
        )
    return phi, a, b, v


def derive_population_model(spec: CorrelationSpec) -> PopulationModel:
    """Exact population covariance implied by the conditional sampling scheme."""
    _, _, _, v = _require_feasible(spec)
    s11, s12, s13, s22, s23 = _blocks(spec, v)
    return PopulationModel(s11, s12, s13, s22, s23, 1.0)


def noisy_population_model(model: PopulationModel, noise_level: float) -> PopulationModel:
    """Population model seen by a teacher whose inputs carry extra noise.

    Matches :func:`apply_teacher_noise` in the population limit, where the
    per-coordinate standard deviation of ``x1`` is ``sqrt(diag(Sigma11))``.
    """
    if not 0.0 <= noise_level <= 1.0:
        raise ValueError(f"noise_level={noise_level!r} outside [0, 1]")
    extra = noise_level ** 2 * np.diag(model.Sigma11)
    return PopulationModel(
        model.Sigma11 + np.diag(extra), model.Sigma12, model.Sigma13,
        model.Sigma22, model.Sigma23, model.Sigma33,
        w_star=model.w_star, noise_var=model.noise_var,
    )


def _stage_generators(seed: int) -> list[np.random.Generator]:
    # Independent, reproducible streams for Y, X2-noise and X1-noise.
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def sample_dataset(spec: CorrelationSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. samples with the three-stage conditional scheme."""
    if int(n) != n or n < 1:
        raise ValueError(f"n={n!r} must be a positive integer")
    if seed < 0:
        raise ValueError("seed must be an unsigned integer")
    phi, a, b, v = _require_feasible(spec)
    n, p = int(n), spec.p
    rng_y, rng_x2, rng_x1 = _stage_generators(seed)

    y = rng_y.standard_normal(n)
    x2 = spec.sigma23 * y[:, None] + np.sqrt(phi) * rng_x2.standard_normal((n, p))
    x1 = a * x2 + b * y[:, None] + np.sqrt(v) * rng_x1.standard_normal((n, p))
    return Dataset(x1=x1, x2=x2, y=y, seed=int(seed), spec=spec)


def apply_teacher_noise(dataset: Dataset, noise_level: float, seed: int) -> Dataset:
    """Copy of ``dataset`` with ``x1 + noise_level * std(x1) * G`` as teacher input."""
    if not 0.0 <= noise_level <= 1.0:
        raise ValueError(f"noise_level={noise_level!r} outside [0, 1]")
    if noise_level == 0.0:
        return replace(dataset)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    scale = dataset.x1.std(axis=0, ddof=1)
    x1 = dataset.x1 + noise_level * scale * rng.standard_normal(dataset.x1.shape)
    return replace(dataset, x1=x1, teacher_noise=float(noise_level))
