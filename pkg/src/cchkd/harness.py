"""Configuration-driven sweeps over the synthetic distillation benchmark.

Each (grid point, seed) pair is an independent work item whose random
streams are derived only from ``(master_seed, data index, seed)``, so the
output does not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .asymptotics import AsymptoticContext, InconsistentModelError, asymptotic_risk, cch_mi_gap
from .gaussian_model import (
    CorrelationSpec,
    InfeasibleSpecError,
    apply_teacher_noise,
    derive_population_model,
    noisy_population_model,
    sample_dataset,
    validate_feasibility,
)
from .mi import ksg_mi
from .regression import (
    TeacherSource,
    fit_student,
    fit_teacher_empirical,
    fit_teacher_population,
    holdout_mse,
)

__all__ = [
    "SCHEMA_VERSION",
    "THREADS_ENV",
    "ConfigError",
    "SweepVariable",
    "SweepConfig",
    "SweepRecord",
    "load_config",
    "run_sweep",
    "run_sigma12_sweep",
    "run_lambda_sweep",
    "run_noise_sweep",
    "grid_means",
]

SCHEMA_VERSION = 1
THREADS_ENV = "CCHKD_THREADS"


class ConfigError(ValueError):
    """Malformed sweep configuration."""


class SweepVariable(str, enum.Enum):
    SIGMA12 = "sigma12"
    LAMBDA = "lambda"
    NOISE_LEVEL = "noise_level"


@dataclass(frozen=True)
class SweepConfig:
    sweep_variable: SweepVariable
    grid: tuple[float, ...]
    spec_base: CorrelationSpec = CorrelationSpec(0.0, 0.9, 0.4, 100)
    n_train: int = 10_000
    n_test: int = 5_000
    lam: float = 0.5
    seeds: tuple[int, ...] = tuple(range(10))
    teacher_source: TeacherSource = TeacherSource.POPULATION_OPTIMAL
    ksg_k: int = 3
    mi_subsample: int = 5_000
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sweep_variable", SweepVariable(self.sweep_variable))
        object.__setattr__(self, "teacher_source", TeacherSource(self.teacher_source))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.grid:
            raise ConfigError("grid must not be empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ConfigError("seeds must be distinct unsigned integers")
        for name in ("n_train", "n_test", "ksg_k", "mi_subsample"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be an unsigned integer")
        if self.n_train == self.spec_base.p:
            raise ConfigError("n_train == p is not covered by either estimator regime")
        if self.teacher_source is TeacherSource.EXPLICIT:
            raise ConfigError("sweeps need a fitted teacher (population_optimal or empirical_ls)")
        if self.teacher_source is TeacherSource.EMPIRICAL_LS and self.n_train <= self.spec_base.p:
            raise ConfigError("an empirical teacher needs n_train > p")
        if self.ksg_k >= min(self.mi_subsample, self.n_test):
            raise ConfigError("ksg_k must be smaller than the MI sample size")
        if self.sweep_variable is SweepVariable.LAMBDA and min(self.grid) < 0:
            raise ConfigError("lambda grid must be nonnegative")
        if self.sweep_variable is SweepVariable.NOISE_LEVEL and not (
                min(self.grid) >= 0 and max(self.grid) <= 1):
            raise ConfigError("noise grid must lie in [0, 1]")
        if self.sweep_variable is SweepVariable.SIGMA12 and not (
                min(self.grid) > -1 and max(self.grid) < 1):
            raise ConfigError("sigma12 grid must lie in (-1, 1)")

    def point_spec(self, value: float) -> CorrelationSpec:
        if self.sweep_variable is SweepVariable.SIGMA12:
            return self.spec_base.with_sigma12(value)
        return self.spec_base

    def check_feasible(self) -> None:
        """Raise :class:`InfeasibleSpecError` naming every infeasible grid point."""
        bad = []
        for value in self.grid:
            spec = self.point_spec(value)
            report = validate_feasibility(spec)
            if not report.feasible:
                bad.append(f"{self.sweep_variable.value}={value}: {report.describe()}")
        if bad:
            raise InfeasibleSpecError("; ".join(bad))

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sweep_variable": self.sweep_variable.value,
            "grid": list(self.grid),
            "spec_base": asdict(self.spec_base),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "lambda": self.lam,
            "seeds": list(self.seeds),
            "teacher_source": self.teacher_source.value,
            "ksg_k": self.ksg_k,
            "mi_subsample": self.mi_subsample,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"schema_version", "sweep_variable", "grid", "spec_base", "n_train", "n_test",
                 "lambda", "seeds", "teacher_source", "ksg_k", "mi_subsample", "master_seed"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        for required in ("sweep_variable", "grid"):
            if required not in data:
                raise ConfigError(f"missing required key {required!r}")
        kwargs = {k: v for k, v in data.items() if k not in ("schema_version", "spec_base", "lambda")}
        if "lambda" in data:
            kwargs["lam"] = float(data["lambda"])
        if "spec_base" in data:
            spec = data["spec_base"]
            if not isinstance(spec, dict) or set(spec) - {"sigma12", "sigma13", "sigma23", "p"}:
                raise ConfigError("spec_base must hold only sigma12, sigma13, sigma23, p")
            base = asdict(CorrelationSpec(0.0, 0.9, 0.4, 100))
            base.update(spec)
            kwargs["spec_base"] = CorrelationSpec(**base)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return SweepConfig.from_json(data)


@dataclass(frozen=True)
class SweepRecord:
    grid_value: float
    seed: int
    mse_kd: float
    mse_no_kd: float
    risk_asymptotic_kd: float
    risk_asymptotic_no_kd: float
    i_ts_closed: float
    i_sy_closed: float
    i_ts_ksg: float
    i_sy_ksg: float
    mi_gap: float
    cch_beneficial: bool

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @property
    def kd_benefit(self) -> float:
        return self.mse_no_kd - self.mse_kd


@dataclass(frozen=True)
class _Item:
    grid_index: int
    grid_value: float
    seed: int


def _stream_seeds(cfg: SweepConfig, item: _Item) -> tuple[int, int, int, int]:
    """Integer seeds for (train, test, train noise, test noise)."""
    # Only sigma12 changes the data distribution; lambda and noise sweeps reuse
    # the same base samples and noise draws at every grid point.
    data_index = item.grid_index if cfg.sweep_variable is SweepVariable.SIGMA12 else 0
    data = np.random.SeedSequence([cfg.master_seed, data_index, item.seed])
    noise = np.random.SeedSequence([cfg.master_seed, item.seed, 1])
    train, test = (int(s) for s in data.generate_state(2, dtype=np.uint64))
    n_train, n_test = (int(s) for s in noise.generate_state(2, dtype=np.uint64))
    return train, test, n_train, n_test


def _run_item(cfg: SweepConfig, item: _Item) -> SweepRecord:
    var = cfg.sweep_variable
    spec = cfg.point_spec(item.grid_value)
    lam = item.grid_value if var is SweepVariable.LAMBDA else cfg.lam
    noise = item.grid_value if var is SweepVariable.NOISE_LEVEL else 0.0

    model = derive_population_model(spec)
    teacher_model = noisy_population_model(model, noise) if noise > 0 else model
    s_train, s_test, s_ntrain, s_ntest = _stream_seeds(cfg, item)
    train = sample_dataset(spec, cfg.n_train, s_train)
    test = sample_dataset(spec, cfg.n_test, s_test)
    if noise > 0:
        train = apply_teacher_noise(train, noise, s_ntrain)
        test = apply_teacher_noise(test, noise, s_ntest)

    if cfg.teacher_source is TeacherSource.POPULATION_OPTIMAL:
        teacher = fit_teacher_population(teacher_model)
    else:
        teacher = fit_teacher_empirical(train)

    student_kd = fit_student(train, teacher, lam)
    student_plain = fit_student(train, teacher, 0.0)

    kappa = cfg.n_train / spec.p
    risk_kd = asymptotic_risk(AsymptoticContext(teacher_model, kappa, teacher, lam)).total
    risk_plain = asymptotic_risk(AsymptoticContext(teacher_model, kappa, teacher, 0.0)).total

    try:
        gap = cch_mi_gap(teacher_model, teacher)
        i_ts, i_sy, mi_gap = gap.i_ts, gap.i_sy, gap.gap
    except InconsistentModelError:
        i_ts = i_sy = mi_gap = math.nan

    m = min(cfg.mi_subsample, cfg.n_test)
    teacher_rep = test.x1[:m] @ teacher.w1
    student_rep = test.x2[:m] @ student_plain.w_hat
    i_ts_ksg = ksg_mi(teacher_rep, student_rep, cfg.ksg_k).value
    i_sy_ksg = ksg_mi(student_rep, test.y[:m], cfg.ksg_k).value

    return SweepRecord(
        grid_value=item.grid_value,
        seed=item.seed,
        mse_kd=holdout_mse(student_kd, test),
        mse_no_kd=holdout_mse(student_plain, test),
        risk_asymptotic_kd=risk_kd,
        risk_asymptotic_no_kd=risk_plain,
        i_ts_closed=i_ts,
        i_sy_closed=i_sy,
        i_ts_ksg=i_ts_ksg,
        i_sy_ksg=i_sy_ksg,
        mi_gap=mi_gap,
        cch_beneficial=bool(mi_gap > 0),
    )


def _thread_count(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(threads))


def run_sweep(cfg: SweepConfig, threads: int | None = None) -> list[SweepRecord]:
    """Run every (grid point, seed) item; records sorted by ``(grid_value, seed)``."""
    cfg.check_feasible()
    items = [_Item(g, value, seed) for g, value in enumerate(cfg.grid) for seed in cfg.seeds]
    workers = _thread_count(threads)
    if workers == 1:
        records = [_run_item(cfg, it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda it: _run_item(cfg, it), items))
    return sorted(records, key=lambda r: (r.grid_value, r.seed))


def _require(cfg: SweepConfig, var: SweepVariable) -> None:
    if cfg.sweep_variable is not var:
        raise ConfigError(f"config sweeps {cfg.sweep_variable.value}, expected {var.value}")


def run_sigma12_sweep(cfg: SweepConfig, threads: int | None = None) -> list[SweepRecord]:
    _require(cfg, SweepVariable.SIGMA12)
    return run_sweep(cfg, threads)


def run_lambda_sweep(cfg: SweepConfig, threads: int | None = None) -> list[SweepRecord]:
    _require(cfg, SweepVariable.LAMBDA)
    return run_sweep(cfg, threads)


def run_noise_sweep(cfg: SweepConfig, threads: int | None = None) -> list[SweepRecord]:
    _require(cfg, SweepVariable.NOISE_LEVEL)
    return run_sweep(cfg, threads)


def grid_means(records: list[SweepRecord], column: str) -> tuple[np.ndarray, np.ndarray]:
    """Seed-averaged ``column`` per grid value, grid values ascending."""
    grid = sorted({r.grid_value for r in records})
    means = []
    for g in grid:
        vals = [float(getattr(r, column)) for r in records if r.grid_value == g]
        means.append(float(np.mean(vals)))
    return np.array(grid), np.array(means)
