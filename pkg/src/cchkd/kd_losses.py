"""Temperature-scaled distillation loss for K-class classifiers.

    L = (1 - lam) * CE(label, softmax(z_s))
        + lam * T^2 * KL(softmax(z_t / T) || softmax(z_s / T))

The same form serves unimodal and cross-modal distillation; only the origin
of the teacher logits differs.  Natural logarithms throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PROB_FLOOR",
    "DistillationConfig",
    "softened_softmax",
    "log_softened_softmax",
    "kl_divergence",
    "kd_loss",
    "kd_loss_gradient",
]

PROB_FLOOR = 1e-30
_LOG_FLOOR = np.log(PROB_FLOOR)


@dataclass(frozen=True)
class DistillationConfig:
    temperature: float = 1.0
    weight: float = 0.5

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("distillation weight must lie in [0, 1]")


def _logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("logits must be a vector with at least two classes")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def log_softened_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    z = _logits(logits) / temperature
    z = z - z.max()
    return z - np.log(np.sum(np.exp(z)))


def softened_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """``softmax(logits / temperature)`` with max subtraction."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    z = _logits(logits) / temperature
    e = np.exp(z - z.max())
    return e / e.sum()


def kl_divergence(p: np.ndarray, log_q: np.ndarray, log_p: np.ndarray | None = None) -> float:
    """``KL(p || q)`` given ``q`` in log space; log-probabilities floored.

    Passing ``log_p`` avoids re-deriving it from ``p`` and makes the
    divergence of identical log-softmax outputs exactly zero.
    """
    if log_p is None:
        log_p = np.log(np.maximum(p, PROB_FLOOR))
    log_p = np.maximum(log_p, _LOG_FLOOR)
    return max(float(np.sum(p * (log_p - np.maximum(log_q, _LOG_FLOOR)))), 0.0)


def _check_pair(student_logits, teacher_logits, label):
    s, t = _logits(student_logits), _logits(teacher_logits)
    if s.shape != t.shape:
        raise ValueError(f"student has {s.size} classes, teacher has {t.size}")
    if int(label) != label or not 0 <= label < s.size:
        raise ValueError(f"label {label!r} is not a class index in [0, {s.size})")
    return s, t, int(label)


def kd_loss(student_logits, teacher_logits, label: int, cfg: DistillationConfig) -> float:
    s, t, label = _check_pair(student_logits, teacher_logits, label)
    temp, lam = cfg.temperature, cfg.weight
    ce = -max(float(log_softened_softmax(s, 1.0)[label]), _LOG_FLOOR)
    log_pt = log_softened_softmax(t, temp)
    kl = kl_divergence(np.exp(log_pt), log_softened_softmax(s, temp), log_pt)
    return (1.0 - lam) * ce + lam * temp * temp * kl


def kd_loss_gradient(student_logits, teacher_logits, label: int, cfg: DistillationConfig) -> np.ndarray:
    """Gradient of :func:`kd_loss` with respect to the student logits."""
    s, t, label = _check_pair(student_logits, teacher_logits, label)
    temp, lam = cfg.temperature, cfg.weight
    grad_ce = softened_softmax(s, 1.0)
    grad_ce[label] -= 1.0
    # d/dz [T^2 KL] = T (q_s - q_t)
    grad_kl = temp * (softened_softmax(s, temp) - softened_softmax(t, temp))
    return (1.0 - lam) * grad_ce + lam * grad_kl
