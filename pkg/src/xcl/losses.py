"""Output distributions, loss functions, and label transforms.

Every loss returns its value together with the analytic gradient with
respect to the raw network outputs, so the training loop never needs
numerical differentiation. All functions accept either a single vector or a
batch (leading axis) and use natural logarithms throughout.

Distillation losses follow the literal formulas:

  categorical KD      KL(teacher_T || student_T), both sides temperature-T
                      softmax, gradient (student_T - teacher_T) / T with no
                      extra T^2 rescaling (deliberate literal reading; only
                      logit scaling is specified).
  Gaussian NLL        0.5*exp(-s)*||mu - y||^2 + 0.5*s     with s = log(var)
  Gaussian KL         0.5*[exp(st - s) + exp(-s)*||mut - mu||^2
                           - (st - s) - 1]
                      taken exactly as printed for isotropic d-dim outputs;
                      `dim_scaled=True` multiplies the variance terms by d
                      (the textbook form), default off.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ShapeError

SIMPLEX_TOL = 1e-9
_TINY = 1e-300


@dataclass(frozen=True)
class CategoricalDist:
    """Probability vector on the class simplex, optionally with logit cache."""

    probs: np.ndarray
    logits: np.ndarray | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size < 1:
            raise DataError("probs must be a 1-D vector")
        if probs.min() < 0.0:
            raise DataError("negative probability component")
        if abs(probs.sum() - 1.0) > SIMPLEX_TOL:
            raise DataError(f"probabilities sum to {probs.sum()!r}, not 1")
        if self.logits is not None:
            logits = np.asarray(self.logits, dtype=np.float64)
            if logits.shape != probs.shape:
                raise ShapeError("logit cache shape differs from probs")
            object.__setattr__(self, "logits", logits)

    @classmethod
    def from_logits(cls, logits, temperature=1.0) -> "CategoricalDist":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(probs=softmax(logits, temperature), logits=logits)

    @property
    def num_classes(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class GaussianPred:
    """Isotropic Gaussian output: mean vector plus scalar log-variance."""

    mu: np.ndarray
    s: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "s", float(self.s))
        if mu.ndim != 1 or mu.size < 1:
            raise DataError("mu must be a 1-D vector with d >= 1")
        if not np.isfinite(self.s) or not np.all(np.isfinite(mu)):
            raise DataError("non-finite Gaussian prediction")

    @property
    def sigma(self) -> float:
        return float(np.exp(0.5 * self.s))


class LossKind(enum.Enum):
    CROSS_ENTROPY_SOFT = "ce"
    KD_CATEGORICAL = "kd"
    GAUSSIAN_NLL = "gaussian-nll"
    GAUSSIAN_KL = "gaussian-kl"


@dataclass(frozen=True)
class LossSpec:
    """Which objective the training loop optimizes and against which target."""

    kind: LossKind
    temperature: float = 1.0
    target: str = "teacher"            # "teacher" or "ground-truth"
    kd_gt_weight: float = 0.0          # blend weight on the ground-truth CE term
    kl_dim_scaled: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.target not in ("teacher", "ground-truth"):
            raise ConfigError(f"unknown target source {self.target!r}")
        if not 0.0 <= self.kd_gt_weight <= 1.0:
            raise ConfigError("kd_gt_weight must be in [0, 1]")


def softmax(logits, temperature=1.0):
    """Temperature softmax over the last axis, stabilized by max subtraction."""
    if temperature <= 0:
        raise ConfigError("temperature must be > 0")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits, temperature=1.0):
    if temperature <= 0:
        raise ConfigError("temperature must be > 0")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def cross_entropy_soft(logits, target):
    """CE of a logit vector against a soft target distribution.

    Returns (loss, grad) where grad = softmax(logits) - target. Batched
    inputs give per-row losses and a grad matrix.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if logits.shape != target.shape:
        raise ShapeError(f"logits {logits.shape} vs target {target.shape}")
    logp = log_softmax(logits)
    loss = -np.sum(np.where(target > 0, target * logp, 0.0), axis=-1)
    grad = softmax(logits) - target
    return loss, grad


def _teacher_temperature_probs(teacher_probs, temperature, teacher_logits=None):
    """Teacher distribution at temperature T.

    At T = 1 the stored probabilities are returned exactly. Otherwise the
    cached pre-softmax logits are rescaled; without a cache, log(probs) is
    treated as logits (shift-invariant, so this is exact whenever the probs
    came from a softmax).
    """
    if temperature == 1.0:
        return np.asarray(teacher_probs, dtype=np.float64)
    base = teacher_logits
    if base is None:
        base = np.log(np.maximum(np.asarray(teacher_probs, dtype=np.float64), _TINY))
    return softmax(base, temperature)


def kd_categorical(teacher_probs, student_logits, temperature=1.0, teacher_logits=None):
    """KL(teacher_T || student_T) plus its gradient w.r.t. student logits.

    Uses the 0*log(0) = 0 convention on the teacher side. The gradient is
    (student_T - teacher_T)/T; no T^2 rescaling is applied.
    """
    teacher_probs = np.asarray(teacher_probs, dtype=np.float64)
    student_logits = np.asarray(student_logits, dtype=np.float64)
    if teacher_probs.shape != student_logits.shape:
        raise ShapeError(
            f"teacher {teacher_probs.shape} vs student {student_logits.shape}"
        )
    sums = np.sum(teacher_probs, axis=-1)
    if teacher_probs.min() < 0.0 or np.max(np.abs(sums - 1.0)) > SIMPLEX_TOL:
        raise DataError("teacher probabilities violate the simplex invariant")
    p = _teacher_temperature_probs(teacher_probs, temperature, teacher_logits)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(np.maximum(p, _TINY)), 0.0)
    logq = log_softmax(student_logits, temperature)
    loss = np.sum(plogp - np.where(p > 0, p * logq, 0.0), axis=-1)
    grad = (softmax(student_logits, temperature) - p) / temperature
    return loss, grad


def gaussian_nll(mu, s, target):
    """Heteroscedastic Gaussian negative log likelihood.

    loss = 0.5*exp(-s)*||mu - y||^2 + 0.5*s, with s the scalar log-variance.
    Returns (loss, grad_mu, grad_s).
    """
    mu = np.asarray(mu, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if mu.shape != target.shape:
        raise ShapeError(f"mu {mu.shape} vs target {target.shape}")
    if s.shape != mu.shape[:-1]:
        raise ShapeError(f"s shape {s.shape} incompatible with mu {mu.shape}")
    diff = mu - target
    sq = np.sum(diff * diff, axis=-1)
    inv_var = np.exp(-s)
    loss = 0.5 * inv_var * sq + 0.5 * s
    grad_mu = inv_var[..., None] * diff
    grad_s = -0.5 * inv_var * sq + 0.5
    return loss, grad_mu, grad_s


def gaussian_kl(teacher_mu, teacher_s, student_mu, student_s, dim_scaled=False):
    """KL between teacher and student isotropic Gaussian outputs.

    Implements 0.5*[exp(st - s) + exp(-s)*||mut - mu||^2 - (st - s) - 1]
    literally; dim_scaled=True multiplies the variance terms by the target
    dimension d. Gradients are taken w.r.t. the student (mu, s) only.
    Returns (loss, grad_mu, grad_s).
    """
    teacher_mu = np.asarray(teacher_mu, dtype=np.float64)
    student_mu = np.asarray(student_mu, dtype=np.float64)
    teacher_s = np.asarray(teacher_s, dtype=np.float64)
    student_s = np.asarray(student_s, dtype=np.float64)
    if teacher_mu.shape != student_mu.shape:
        raise ShapeError(f"teacher mu {teacher_mu.shape} vs student mu {student_mu.shape}")
    if teacher_s.shape != student_s.shape or teacher_s.shape != teacher_mu.shape[:-1]:
        raise ShapeError("log-variance shapes incompatible with mu")
    d = float(teacher_mu.shape[-1]) if dim_scaled else 1.0
    ds = teacher_s - student_s
    diff = teacher_mu - student_mu
    sq = np.sum(diff * diff, axis=-1)
    inv_var = np.exp(-student_s)
    loss = 0.5 * (d * np.exp(ds) + inv_var * sq - d * ds - d)
    grad_mu = inv_var[..., None] * (student_mu - teacher_mu)
    grad_s = 0.5 * (-d * np.exp(ds) - inv_var * sq + d)
    return loss, grad_mu, grad_s


def normalized_entropy(probs):
    """Shannon entropy divided by log(c); 0 for one-hot, 1 for uniform.

    Accepts a batch over the last axis; the result is clamped to [0, 1]
    against rounding.
    """
    probs = np.asarray(probs, dtype=np.float64)
    c = probs.shape[-1]
    if c < 2:
        raise ConfigError("normalized entropy needs at least 2 classes")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(np.maximum(probs, _TINY)), 0.0)
    ent = -np.sum(terms, axis=-1) / np.log(c)
    return np.clip(ent, 0.0, 1.0)


def label_smooth(class_index, num_classes, eps):
    """Smoothed one-hot: 1-eps on the true class, eps/(c-1) elsewhere."""
    if not 0.0 <= eps < 1.0:
        raise ConfigError("smoothing eps must be in [0, 1)")
    if not 0 <= class_index < num_classes:
        raise ConfigError("class index out of range")
    y = np.full(num_classes, eps / (num_classes - 1))
    y[class_index] = 1.0 - eps
    return y


def mix_labels(y_i, y_j, lam):
    """Convex combination lam*y_i + (1-lam)*y_j of two label distributions."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("mixing coefficient must be in [0, 1]")
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        raise ShapeError(f"label shapes differ: {y_i.shape} vs {y_j.shape}")
    return lam * y_i + (1.0 - lam) * y_j


def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (num_classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def smoothed_targets(labels, num_classes, eps):
    """Batch label smoothing; eps = 0 reduces to plain one-hot."""
    if eps == 0.0:
        return one_hot(labels, num_classes)
    return np.stack([label_smooth(int(k), num_classes, eps) for k in np.asarray(labels)])
