"""Synthetic datasets, splits, and the dataset file format.

Desk-scale stand-ins for the image benchmarks: Gaussian blob mixtures for
classification (class overlap is the knob that creates label ambiguity) and
a 2-target heteroscedastic regression generator whose noise level depends on
the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .rng import Rng

FLOAT_FMT = ".17g"  # exact decimal round-trip for float64


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


@dataclass
class Dataset:
    """Immutable matrix of features plus class labels or regression targets."""

    features: np.ndarray                 # (n, d) float64
    labels: np.ndarray | None = None     # (n,) int64 class indices
    targets: np.ndarray | None = None    # (n, m) float64 regression targets
    num_classes: int | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError("features must be a nonempty (n, d) matrix")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels is not None and self.targets is not None:
            raise DataError("dataset cannot carry both labels and targets")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise DataError("labels must be a length-n vector")
            if self.num_classes is None:
                raise DataError("class-labeled dataset needs num_classes")
            if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
                raise DataError("class index outside [0, num_classes)")
        if self.targets is not None:
            self.targets = np.ascontiguousarray(self.targets, dtype=np.float64)
            if self.targets.ndim != 2 or self.targets.shape[0] != self.n:
                raise DataError("targets must be an (n, m) matrix")
        for arr in (self.features, self.labels, self.targets):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def label_kind(self) -> str:
        if self.labels is not None:
            return "class"
        if self.targets is not None:
            return "regression"
        return "none"

    @property
    def class_counts(self) -> np.ndarray:
        if self.labels is None:
            raise DataError("class_counts requires class labels")
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=None if self.labels is None else self.labels[idx],
            targets=None if self.targets is None else self.targets[idx],
            num_classes=self.num_classes,
        )


def make_blobs(num_classes, dim, n_per_class, spread, center_scale, rng: Rng) -> Dataset:
    """Isotropic Gaussian blobs around uniform random class centers.

    Centers are i.i.d. uniform in [-center_scale, center_scale]^dim and each
    sample is center + N(0, spread^2 I). The spread controls class overlap,
    i.e. how ambiguous the labels are.
    """
    if num_classes < 2:
        raise ConfigError("need at least 2 classes")
    if dim < 1 or n_per_class < 1:
        raise ConfigError("dim and n_per_class must be >= 1")
    if spread < 0:
        raise ConfigError("spread must be nonnegative")
    gen = rng.substream("blobs")
    centers = gen.uniform(-center_scale, center_scale, size=(num_classes, dim))
    feats = np.empty((num_classes * n_per_class, dim))
    labels = np.repeat(np.arange(num_classes), n_per_class)
    for k in range(num_classes):
        block = slice(k * n_per_class, (k + 1) * n_per_class)
        feats[block] = centers[k] + spread * gen.standard_normal((n_per_class, dim))
    return Dataset(features=feats, labels=labels, num_classes=num_classes)


def make_heteroscedastic_regression(n, d_in, noise_fn, rng: Rng) -> Dataset:
    """Inputs uniform in [-1, 1]^d_in with 2-D targets and input-dependent noise.

    Both variants emit y = g(x) + eps with eps ~ N(0, sigma(x)^2) per
    component. Writing x1, x2 for the first two input coordinates (x2 = 0
    when d_in == 1):

      linear:      g(x) = (x1, x2)                  sigma(x) = 0.05 + 0.3*|x1|
      sinusoidal:  g(x) = (sin(pi x1), sin(pi x1)*x2)  sigma(x) = 0.05 + 0.3*(1 - x1^2)

    The linear variant is noisiest at the input-domain edges; the sinusoidal
    one is noisiest in the middle, which is where convex combinations of
    input pairs concentrate.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if d_in < 1:
        raise ConfigError("d_in must be >= 1")
    if noise_fn not in ("linear", "sinusoidal"):
        raise ConfigError(f"unknown noise_fn {noise_fn!r}")
    gen = rng.substream("hetero")
    x = gen.uniform(-1.0, 1.0, size=(n, d_in))
    x1 = x[:, 0]
    x2 = x[:, 1] if d_in > 1 else np.zeros(n)
    if noise_fn == "linear":
        g = np.column_stack([x1, x2])
        sigma = 0.05 + 0.3 * np.abs(x1)
    else:
        base = np.sin(np.pi * x1)
        g = np.column_stack([base, base * x2])
        sigma = 0.05 + 0.3 * (1.0 - x1 ** 2)
    y = g + sigma[:, None] * gen.standard_normal((n, 2))
    return Dataset(features=x, targets=y)


def hetero_noise_sigma(x1, noise_fn):
    """The documented sigma(x) curves, exposed for oracles and tests."""
    x1 = np.asarray(x1, dtype=np.float64)
    if noise_fn == "linear":
        return 0.05 + 0.3 * np.abs(x1)
    if noise_fn == "sinusoidal":
        return 0.05 + 0.3 * (1.0 - x1 ** 2)
    raise ConfigError(f"unknown noise_fn {noise_fn!r}")


def split_disjoint(dataset: Dataset, fraction, class_balanced, rng: Rng):
    """Random partition into (A, B) where A holds roughly `fraction` of rows.

    Class-balanced mode splits every class separately so per-class
    proportions are preserved within one sample. Selected indices keep their
    original relative order, so splitting is stable under row identity.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("fraction must be in (0, 1)")
    gen = rng.substream("split")
    n = dataset.n
    if class_balanced:
        if dataset.labels is None:
            raise DataError("class-balanced split requires class labels")
        a_parts = []
        for k in range(dataset.num_classes):
            idx = np.flatnonzero(dataset.labels == k)
            if idx.size < 2:
                raise DataError(f"class {k} has fewer than 2 samples; cannot split")
            take = int(round(fraction * idx.size))
            take = min(max(take, 1), idx.size - 1)
            picked = gen.permutation(idx.size)[:take]
            a_parts.append(idx[picked])
        a_idx = np.sort(np.concatenate(a_parts))
    else:
        if n < 2:
            raise DataError("cannot split a single-row dataset")
        take = int(round(fraction * n))
        take = min(max(take, 1), n - 1)
        a_idx = np.sort(gen.permutation(n)[:take])
    mask = np.zeros(n, dtype=bool)
    mask[a_idx] = True
    b_idx = np.flatnonzero(~mask)
    return dataset.subset(a_idx), dataset.subset(b_idx)


def subsample_imbalanced(dataset: Dataset, reduced_class_count, keep_fraction, rng: Rng) -> Dataset:
    """Shrink a random subset of classes to a fraction of their samples."""
    if dataset.labels is None:
        raise DataError("imbalanced subsampling requires class labels")
    if reduced_class_count > dataset.num_classes:
        raise ConfigError("reduced_class_count exceeds number of classes")
    if not 0.0 < keep_fraction <= 1.0:
        raise ConfigError("keep_fraction must be in (0, 1]")
    gen = rng.substream("imbalance")
    reduced = gen.choice(dataset.num_classes, size=reduced_class_count, replace=False)
    reduced = set(int(k) for k in reduced)
    keep_parts = []
    for k in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == k)
        if k in reduced:
            take = int(np.ceil(keep_fraction * idx.size))
            picked = gen.permutation(idx.size)[:take]
            keep_parts.append(idx[picked])
        else:
            keep_parts.append(idx)
    keep = np.sort(np.concatenate(keep_parts))
    return dataset.subset(keep)


# ---------------------------------------------------------------------------
# Dataset file format: versioned text header + comma-separated decimal rows.
# Line 1: "xcl-dataset v1"
# Line 2: "n=<n> d=<d> labels=<class|regression|none> [c=<c>] [m=<m>]"
# Lines 3..: one row each; features, then class index or target components.
# ---------------------------------------------------------------------------

MAGIC_DATASET = "xcl-dataset v1"


def save_dataset(dataset: Dataset, path) -> None:
    lines = [MAGIC_DATASET]
    head = f"n={dataset.n} d={dataset.dim} labels={dataset.label_kind}"
    if dataset.label_kind == "class":
        head += f" c={dataset.num_classes}"
    elif dataset.label_kind == "regression":
        head += f" m={dataset.targets.shape[1]}"
    lines.append(head)
    for i in range(dataset.n):
        cells = [_fmt(v) for v in dataset.features[i]]
        if dataset.label_kind == "class":
            cells.append(str(int(dataset.labels[i])))
        elif dataset.label_kind == "regression":
            cells.extend(_fmt(v) for v in dataset.targets[i])
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header_fields(text, lineno):
    fields = {}
    for token in text.split():
        if "=" not in token:
            raise ParseError(f"malformed header token {token!r}", line=lineno)
        key, value = token.split("=", 1)
        fields[key] = value
    return fields


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC_DATASET:
        raise ParseError(f"expected header {MAGIC_DATASET!r}", line=1)
    if len(lines) < 2:
        raise ParseError("missing dimension header", line=2)
    fields = _parse_header_fields(lines[1], 2)
    try:
        n = int(fields["n"])
        d = int(fields["d"])
        kind = fields["labels"]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad dimension header: {exc}", line=2)
    num_classes = int(fields["c"]) if kind == "class" else None
    m = int(fields["m"]) if kind == "regression" else 0
    expected_cells = d + (1 if kind == "class" else m)

    feats = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64) if kind == "class" else None
    targets = np.empty((n, m)) if kind == "regression" else None
    for i in range(n):
        lineno = 3 + i
        if lineno - 1 >= len(lines):
            raise ParseError("file truncated", line=lineno)
        cells = lines[lineno - 1].split(",")
        if len(cells) != expected_cells:
            raise ParseError(
                f"expected {expected_cells} values, found {len(cells)}", line=lineno
            )
        try:
            feats[i] = [float(c) for c in cells[:d]]
            if kind == "class":
                labels[i] = int(cells[d])
            elif kind == "regression":
                targets[i] = [float(c) for c in cells[d:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno)
    return Dataset(features=feats, labels=labels, targets=targets, num_classes=num_classes)
