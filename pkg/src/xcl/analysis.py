"""Measurement procedures: entropy splits, zero-accuracy subsets, metrics.

All operations are pure reads over frozen models. Means reduce in index
order, tie-breaks are by ascending original index or lowest class index, so
every result is deterministic and permutation-covariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DataError
from .losses import normalized_entropy, softmax
from .nn_core import Network, forward
from .rng import Rng
from .teacher import Teacher, TeacherOutput, teacher_predict


def _as_teacher(model) -> Teacher:
    if isinstance(model, Teacher):
        return model
    if isinstance(model, Network):
        return Teacher.single(model)
    raise ConfigError(f"expected Network or Teacher, got {type(model).__name__}")


@dataclass
class SplitResult:
    """Entropy-sorted halves of a held-out set (indices into the input)."""

    high_set: np.ndarray
    low_set: np.ndarray
    avg_entropy_high: float
    avg_entropy_low: float


def split_by_entropy(model, heldout: Dataset) -> SplitResult:
    """Split indices into high/low halves of teacher-prediction entropy.

    Samples are sorted by normalized entropy descending with ties broken by
    ascending original index; the top ceil(n/2) go to the high half.
    """
    teacher = _as_teacher(model)
    if teacher.head.kind != "logits":
        raise ConfigError("entropy split requires a classification teacher")
    if heldout.n < 1:
        raise DataError("empty held-out set")
    out = teacher_predict(teacher, heldout.features)
    ent = normalized_entropy(out.probs)
    # lexsort: last key is primary; negate entropy for descending order.
    order = np.lexsort((np.arange(heldout.n), -ent))
    n_high = int(np.ceil(heldout.n / 2))
    high, low = order[:n_high], order[n_high:]
    return SplitResult(
        high_set=high,
        low_set=low,
        avg_entropy_high=float(ent[high].mean()),
        avg_entropy_low=float(ent[low].mean()) if low.size else 0.0,
    )


def zero_accuracy_subset(model, heldout: Dataset) -> np.ndarray:
    """Indices where the teacher's argmax disagrees with the ground truth."""
    teacher = _as_teacher(model)
    if teacher.head.kind != "logits":
        raise ConfigError("zero-accuracy subset requires a classification teacher")
    if heldout.labels is None:
        raise DataError("held-out set has no ground-truth labels")
    out = teacher_predict(teacher, heldout.features)
    pred = np.argmax(out.probs, axis=1)  # argmax resolves ties to the lowest index
    return np.flatnonzero(pred != heldout.labels)


@dataclass
class MetricsReport:
    """Evaluation summary; fields not applicable to the head kind are None."""

    top1: float | None = None
    topk: float | None = None
    mean_error: float | None = None
    avg_entropy: float | None = None
    avg_truth_prob: float | None = None


def _topk_hits(probs, labels, k):
    # Stable argsort on negated probs: ties resolve toward lower class index.
    order = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    return np.any(order == labels[:, None], axis=1)


def evaluate(model, dataset: Dataset, k=5, error_kind="euclidean") -> MetricsReport:
    """Accuracy/entropy metrics for classifiers, mean error for regressors."""
    teacher = _as_teacher(model)
    out = teacher_predict(teacher, dataset.features)
    if teacher.head.kind == "logits":
        if dataset.labels is None:
            raise DataError("classification evaluation needs ground-truth labels")
        c = out.probs.shape[1]
        if k > c:
            raise ConfigError(f"top-{k} undefined with {c} classes")
        pred = np.argmax(out.probs, axis=1)
        top1 = float(np.mean(pred == dataset.labels))
        topk = float(np.mean(_topk_hits(out.probs, dataset.labels, k)))
        truth_prob = float(np.mean(out.probs[np.arange(dataset.n), dataset.labels]))
        ent = float(np.mean(normalized_entropy(out.probs)))
        return MetricsReport(top1=top1, topk=topk, avg_entropy=ent, avg_truth_prob=truth_prob)
    if dataset.targets is None:
        raise DataError("regression evaluation needs ground-truth targets")
    errs = [
        error_metric(out.mu[i], dataset.targets[i], kind=error_kind)
        for i in range(dataset.n)
    ]
    return MetricsReport(mean_error=float(np.mean(errs)))


def error_metric(pred_mu, target, kind="euclidean") -> float:
    """Euclidean distance or angular error in degrees between two vectors."""
    pred_mu = np.asarray(pred_mu, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred_mu.shape != target.shape:
        raise ConfigError("prediction and target dims differ")
    if kind == "euclidean":
        return float(np.linalg.norm(pred_mu - target))
    if kind == "angular":
        np_ = np.linalg.norm(pred_mu)
        nt = np.linalg.norm(target)
        if np_ == 0.0 or nt == 0.0:
            raise DataError("angular error undefined for zero vectors")
        cosine = np.clip(np.dot(pred_mu, target) / (np_ * nt), -1.0, 1.0)
        return float(np.degrees(np.arccos(cosine)))
    raise ConfigError(f"unknown error kind {kind!r}")


def uncertainty_vs_lambda(model, dataset: Dataset, lambda_grid, pairs_per_lambda,
                          rng: Rng):
    """Mean predicted sigma over blended input pairs, per mixing coefficient.

    One set of pairs is drawn and reused across the whole grid (variance
    reduction: each lambda sees the same endpoints). Returns a list of
    (lambda, mean sigma) tuples in grid order.
    """
    teacher = _as_teacher(model)
    if teacher.head.kind != "gaussian":
        raise ConfigError("uncertainty curve requires a gaussian-head model")
    grid = [float(v) for v in lambda_grid]
    if any(not 0.0 <= v <= 1.0 for v in grid):
        raise ConfigError("lambda grid values must lie in [0, 1]")
    if pairs_per_lambda < 1:
        raise ConfigError("pairs_per_lambda must be >= 1")
    gen = rng.substream("pairs")
    i = gen.integers(dataset.n, size=pairs_per_lambda)
    j = gen.integers(dataset.n, size=pairs_per_lambda)
    xi, xj = dataset.features[i], dataset.features[j]
    curve = []
    for lam in grid:
        out = teacher_predict(teacher, lam * xi + (1.0 - lam) * xj)
        curve.append((lam, float(np.mean(np.exp(0.5 * out.s)))))
    return curve
