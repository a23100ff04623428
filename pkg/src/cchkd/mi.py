"""Mutual-information estimators (nats).

``ksg_mi`` is the Kraskov-Stoegbauer-Grassberger estimator (first variant)
for two continuous variables; ``ross_mi`` is its discrete-continuous
counterpart.  Both use the max-norm.  Neighbour search is exact: chunked
brute force up to :data:`BRUTE_FORCE_MAX_N` points, a k-d tree above that.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .special import digamma

__all__ = [
    "BRUTE_FORCE_MAX_N",
    "Estimator",
    "MiEstimate",
    "gaussian_mi",
    "ksg_mi",
    "ross_mi",
    "kth_neighbor_distance",
    "count_within",
]

BRUTE_FORCE_MAX_N = 20_000
JITTER_SEED = 20240917
JITTER_SCALE = 1e-10

_CHUNK_ELEMS = 4_000_000


class Estimator(str, enum.Enum):
    GAUSSIAN_CLOSED_FORM = "gaussian_closed_form"
    KSG = "ksg"
    ROSS = "ross"


@dataclass(frozen=True)
class MiEstimate:
    value: float
    estimator: Estimator
    k: int | None
    n: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("mutual information estimate is not finite")
        if self.k is not None and not 0 < self.k < self.n:
            raise ValueError("k must satisfy 0 < k < n")


def gaussian_mi(rho: float) -> float:
    """MI of a bivariate Gaussian with correlation ``rho``."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho|={abs(rho)} must be < 1")
    return -0.5 * math.log1p(-rho * rho)


def _as_2d(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or an n x d matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _standardize(arr: np.ndarray, rng: np.random.Generator, name: str) -> np.ndarray:
    """Unit-variance columns plus a tiny fixed-seed jitter to break ties.

    The max-norm is not scale-invariant, so without standardization an
    affine rescaling of one variable would change the neighbour structure.
    """
    std = arr.std(axis=0)
    if np.any(std == 0):
        raise ValueError(f"{name} has a zero-variance column")
    z = (arr - arr.mean(axis=0)) / std
    return z + JITTER_SCALE * rng.uniform(-1.0, 1.0, size=arr.shape)


def _chunks(n_rows: int, n_cols: int, dim: int):
    step = max(1, _CHUNK_ELEMS // max(1, n_cols * dim))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def _cheb(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.abs(a[:, None, 0] - b[None, :, 0])
    for j in range(1, a.shape[1]):
        np.maximum(out, np.abs(a[:, None, j] - b[None, :, j]), out=out)
    return out


def _resolve_backend(n: int, backend: str) -> str:
    if backend == "auto":
        return "brute" if n <= BRUTE_FORCE_MAX_N else "tree"
    if backend not in ("brute", "tree"):
        raise ValueError(f"unknown neighbour backend {backend!r}")
    return backend


def kth_neighbor_distance(points: np.ndarray, k: int, backend: str = "auto") -> np.ndarray:
    """Max-norm distance from each point to its ``k``-th nearest other point."""
    n = points.shape[0]
    if not 0 < k < n:
        raise ValueError(f"k={k} must satisfy 0 < k < n={n}")
    if _resolve_backend(n, backend) == "tree":
        dist, _ = cKDTree(points).query(points, k=k + 1, p=np.inf)
        return dist[:, k]
    out = np.empty(n)
    for sl in _chunks(n, n, points.shape[1]):
        d = _cheb(points[sl], points)
        # self-distance 0 sits at index 0 after partitioning
        out[sl] = np.partition(d, k, axis=1)[:, k]
    return out


def count_within(points: np.ndarray, radius: np.ndarray, strict: bool = True,
                 backend: str = "auto") -> np.ndarray:
    """Count other points within ``radius[i]`` of point ``i`` (max-norm)."""
    n = points.shape[0]
    radius = np.asarray(radius, dtype=float)
    if _resolve_backend(n, backend) == "tree":
        r = np.nextafter(radius, 0.0) if strict else radius
        counts = cKDTree(points).query_ball_point(points, r, p=np.inf, return_length=True)
        return np.asarray(counts, dtype=np.int64) - 1
    out = np.empty(n, dtype=np.int64)
    for sl in _chunks(n, n, points.shape[1]):
        d = _cheb(points[sl], points)
        rad = radius[sl, None]
        hit = d < rad if strict else d <= rad
        out[sl] = hit.sum(axis=1) - 1
    return out


def ksg_mi(x, y, k: int = 3, backend: str = "auto") -> MiEstimate:
    """KSG estimate of ``I(x; y)`` from paired samples."""
    xs, ys = _as_2d(x, "x"), _as_2d(y, "y")
    n = xs.shape[0]
    if ys.shape[0] != n:
        raise ValueError("x and y must have the same number of samples")
    if not 0 < k < n:
        raise ValueError(f"k={k} must satisfy 0 < k < n={n}")
    rng = np.random.default_rng(JITTER_SEED)
    xs = _standardize(xs, rng, "x")
    ys = _standardize(ys, rng, "y")
    joint = np.hstack([xs, ys])
    eps = kth_neighbor_distance(joint, k, backend)
    nx = count_within(xs, eps, strict=True, backend=backend)
    ny = count_within(ys, eps, strict=True, backend=backend)
    value = digamma(k) + digamma(n) - float(np.mean(digamma(nx + 1.0) + digamma(ny + 1.0)))
    return MiEstimate(value, Estimator.KSG, k, n)


def ross_mi(labels, y, k: int = 3, backend: str = "auto") -> MiEstimate:
    """Ross estimate of ``I(label; y)`` for a discrete label and continuous ``y``."""
    labels = np.asarray(labels)
    ys = _as_2d(y, "y")
    n = ys.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels must be a vector matching y")
    if k < 1:
        raise ValueError("k must be positive")
    classes, inverse, class_counts = np.unique(labels, return_inverse=True, return_counts=True)
    if np.any(class_counts <= k):
        small = classes[class_counts <= k]
        raise ValueError(f"classes {small.tolist()} have <= k={k} members")
    rng = np.random.default_rng(JITTER_SEED)
    ys = _standardize(ys, rng, "y")

    radius = np.empty(n)
    for c in range(classes.size):
        idx = np.flatnonzero(inverse == c)
        radius[idx] = kth_neighbor_distance(ys[idx], k, backend)
    # m includes the k-th same-label neighbour itself
    m = count_within(ys, radius, strict=False, backend=backend)
    label_n = class_counts[inverse].astype(float)
    value = (digamma(n) - float(np.mean(digamma(label_n))) + digamma(k)
             - float(np.mean(digamma(m.astype(float)))))
    return MiEstimate(value, Estimator.ROSS, k, n)
