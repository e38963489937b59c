"""Approximations q(x) of the data distribution for extended transfer-sets.

The samplers are stateless configuration objects; randomness comes in
through the generator passed to ``sample``, so parallel workers just split
substreams. Every sampler returns a SampleBatch so that provenance (source
indices, mixing coefficients) survives into materialized transfer-sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DataError, ShapeError


@dataclass
class SampleBatch:
    """Sampled inputs plus whatever provenance the sampler can offer."""

    inputs: np.ndarray                   # (n, d)
    source_indices: np.ndarray | None = None   # rows taken verbatim from a dataset
    pair_indices: np.ndarray | None = None     # (n, 2) for mixing samplers
    lambdas: np.ndarray | None = None          # (n,) mixing coefficients


def mix_pair(x_i, x_j, lam):
    """Elementwise convex combination lam*x_i + (1-lam)*x_j."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("mixing coefficient must be in [0, 1]")
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ShapeError(f"shapes differ: {x_i.shape} vs {x_j.shape}")
    return lam * x_i + (1.0 - lam) * x_j


def sample_mix_batch(dataset: Dataset, n, gen) -> SampleBatch:
    """n rows, each a convex blend of two uniformly drawn samples.

    Pair members are drawn independently (a sample may pair with itself)
    and each row gets its own lam ~ unif[0, 1].
    """
    if dataset.n < 1:
        raise DataError("empty dataset")
    if n < 1:
        raise ConfigError("n must be >= 1")
    i = gen.integers(dataset.n, size=n)
    j = gen.integers(dataset.n, size=n)
    lam = gen.uniform(0.0, 1.0, size=n)
    inputs = lam[:, None] * dataset.features[i] + (1.0 - lam[:, None]) * dataset.features[j]
    return SampleBatch(inputs=inputs, pair_indices=np.column_stack([i, j]), lambdas=lam)


def _cutmix(x_i, x_j, lam, height, width, gen):
    """Rectangular block replacement; returns (vector, fraction kept from x_i).

    The block has area fraction ~(1-lam): side lengths round(W*sqrt(1-lam))
    by round(H*sqrt(1-lam)). Its center is drawn uniformly and then clamped
    so the block always fits inside the grid, which guarantees lam = 0
    replaces everything and lam = 1 replaces nothing.
    """
    rw = int(round(width * np.sqrt(1.0 - lam)))
    rh = int(round(height * np.sqrt(1.0 - lam)))
    out = np.array(x_i, dtype=np.float64, copy=True).reshape(height, width)
    if rw > 0 and rh > 0:
        cx = int(gen.integers(width))
        cy = int(gen.integers(height))
        x0 = min(max(cx - rw // 2, 0), width - rw)
        y0 = min(max(cy - rh // 2, 0), height - rh)
        out[y0:y0 + rh, x0:x0 + rw] = np.asarray(x_j, dtype=np.float64).reshape(
            height, width
        )[y0:y0 + rh, x0:x0 + rw]
    kept = 1.0 - (rw * rh) / (width * height)
    return out.reshape(-1), kept


def cutmix_pair(x_i, x_j, lam, grid_hw, gen):
    """Copy a rectangular block of x_j into x_i, treating rows as H x W grids."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("mixing coefficient must be in [0, 1]")
    height, width = grid_hw
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ShapeError(f"shapes differ: {x_i.shape} vs {x_j.shape}")
    if x_i.size != height * width:
        raise ConfigError(f"feature dim {x_i.size} does not match {height}x{width} grid")
    return _cutmix(x_i, x_j, lam, height, width, gen)[0]


def noise_augment(x, sigma, gen):
    """x plus i.i.d. N(0, sigma^2) per component."""
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0.0:
        return x.copy()
    return x + sigma * gen.standard_normal(x.shape)


def gaussian_image(dim, gen):
    """A vector with every component drawn from N(0, 1)."""
    if dim < 1:
        raise ConfigError("dim must be >= 1")
    return gen.standard_normal(dim)


@dataclass(frozen=True)
class ConditionalGenerator:
    """Class-conditional diagonal Gaussian, fittable in closed form.

    Conditioning on a mixed class vector e interpolates both the mean and
    the per-dimension scale linearly, so it satisfies the mixed-class
    sampling interface exactly while remaining a drop-in slot for a real
    generative model.
    """

    class_means: np.ndarray    # (c, d)
    class_scales: np.ndarray   # (c, d) strictly positive

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=np.float64)
        scales = np.asarray(self.class_scales, dtype=np.float64)
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_scales", scales)
        if means.ndim != 2 or means.shape[0] < 2:
            raise ConfigError("need class means for at least 2 classes")
        if scales.shape != means.shape:
            raise ShapeError("scales shape must match means")
        if scales.min() <= 0:
            raise DataError("class scales must be strictly positive")

    @property
    def num_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.class_means.shape[1]


SCALE_FLOOR = 1e-6


def fit_toy_generator(dataset: Dataset) -> ConditionalGenerator:
    """Per-class sample means and (ddof=1) standard deviations, floored."""
    if dataset.labels is None:
        raise DataError("generator fitting requires class labels")
    c, d = dataset.num_classes, dataset.dim
    means = np.empty((c, d))
    scales = np.empty((c, d))
    for k in range(c):
        rows = dataset.features[dataset.labels == k]
        if rows.shape[0] < 2:
            raise DataError(f"class {k} has fewer than 2 samples")
        means[k] = rows.mean(axis=0)
        scales[k] = np.maximum(rows.std(axis=0, ddof=1), SCALE_FLOOR)
    return ConditionalGenerator(class_means=means, class_scales=scales)


def mix_class_vector(num_classes, i, j, lam):
    """Convex blend of two one-hot class vectors; always on the simplex."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("mixing coefficient must be in [0, 1]")
    e = np.zeros(num_classes)
    e[i] += lam
    e[j] += 1.0 - lam
    return e


def generate(gen_model: ConditionalGenerator, z, e):
    """x = sum_k e_k*mean_k + z * sum_k e_k*scale_k for a class vector e."""
    z = np.asarray(z, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if z.shape != (gen_model.latent_dim,):
        raise ShapeError(f"latent z must have dim {gen_model.latent_dim}")
    if e.shape != (gen_model.num_classes,):
        raise ShapeError(f"class vector must have {gen_model.num_classes} entries")
    if e.min() < 0 or abs(e.sum() - 1.0) > 1e-9:
        raise DataError("class vector is off the simplex")
    return e @ gen_model.class_means + z * (e @ gen_model.class_scales)


def sample_generator_mix(gen_model: ConditionalGenerator, gen, mixing=True):
    """One draw of the mixed-class generator.

    Draw order is fixed: classes i, j, then lam, then the latent z. With
    mixing disabled the conditioning vector stays one-hot on i.
    """
    c = gen_model.num_classes
    i = int(gen.integers(c))
    j = int(gen.integers(c))
    lam = float(gen.uniform(0.0, 1.0)) if mixing else 1.0
    z = gen.standard_normal(gen_model.latent_dim)
    e = mix_class_vector(c, i, j, lam)
    return generate(gen_model, z, e)


# ---------------------------------------------------------------------------
# Sampler objects: uniform interface over the q(x) choices.
# ---------------------------------------------------------------------------


class TransferSampler:
    """Base: subclasses implement sample(n, gen) -> SampleBatch."""

    name = "base"

    def sample(self, n, gen) -> SampleBatch:  # pragma: no cover - interface
        raise NotImplementedError

    def provenance(self) -> str:
        return self.name


@dataclass
class EmpiricalSampler(TransferSampler):
    """Rows of the empirical dataset, uniformly or importance-weighted.

    With replace=False and n equal to the dataset size this is a pure
    permutation of the data.
    """

    dataset: Dataset
    replace: bool = True
    weights: np.ndarray | None = None

    name = "empirical"

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        if not self.replace:
            if n > self.dataset.n:
                raise ConfigError("cannot draw more rows than the dataset holds without replacement")
            idx = gen.permutation(self.dataset.n)[:n]
        else:
            idx = gen.choice(self.dataset.n, size=n, replace=True, p=self.weights)
        return SampleBatch(inputs=self.dataset.features[idx], source_indices=idx)

    def provenance(self) -> str:
        mode = "perm" if not self.replace else ("weighted" if self.weights is not None else "uniform")
        return f"empirical({mode})"


@dataclass
class MixSampler(TransferSampler):
    """Convex pair blends; optional per-sample weights bias the pair draws."""

    dataset: Dataset
    weights: np.ndarray | None = None

    name = "mix"

    def sample(self, n, gen) -> SampleBatch:
        if self.weights is None:
            return sample_mix_batch(self.dataset, n, gen)
        if n < 1:
            raise ConfigError("n must be >= 1")
        i = gen.choice(self.dataset.n, size=n, p=self.weights)
        j = gen.choice(self.dataset.n, size=n, p=self.weights)
        lam = gen.uniform(0.0, 1.0, size=n)
        inputs = (lam[:, None] * self.dataset.features[i]
                  + (1.0 - lam[:, None]) * self.dataset.features[j])
        return SampleBatch(inputs=inputs, pair_indices=np.column_stack([i, j]),
                           lambdas=lam)

    def provenance(self) -> str:
        return "mix" if self.weights is None else "mix(weighted)"


@dataclass
class CutMixSampler(TransferSampler):
    dataset: Dataset
    grid_hw: tuple[int, int]

    name = "cutmix"

    def __post_init__(self):
        h, w = self.grid_hw
        if h * w != self.dataset.dim:
            raise ConfigError(f"grid {h}x{w} incompatible with feature dim {self.dataset.dim}")

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        h, w = self.grid_hw
        i = gen.integers(self.dataset.n, size=n)
        j = gen.integers(self.dataset.n, size=n)
        lam = gen.uniform(0.0, 1.0, size=n)
        rows = np.empty((n, self.dataset.dim))
        kept = np.empty(n)
        for r in range(n):
            rows[r], kept[r] = _cutmix(
                self.dataset.features[i[r]], self.dataset.features[j[r]], lam[r], h, w, gen
            )
        return SampleBatch(
            inputs=rows, pair_indices=np.column_stack([i, j]), lambdas=kept
        )

    def provenance(self) -> str:
        return f"cutmix({self.grid_hw[0]}x{self.grid_hw[1]})"


@dataclass
class NoiseAugmentSampler(TransferSampler):
    """Empirical rows with pixel-wise Gaussian noise (variance 0.02 default)."""

    dataset: Dataset
    sigma: float = float(np.sqrt(0.02))

    name = "noise"

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        idx = gen.integers(self.dataset.n, size=n)
        rows = self.dataset.features[idx] + self.sigma * gen.standard_normal(
            (n, self.dataset.dim)
        )
        return SampleBatch(inputs=rows, source_indices=idx)

    def provenance(self) -> str:
        return f"noise(sigma={self.sigma:g})"


@dataclass
class GaussianImageSampler(TransferSampler):
    dim: int

    name = "gaussian-image"

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        return SampleBatch(inputs=gen.standard_normal((n, self.dim)))


@dataclass
class GeneratorMixSampler(TransferSampler):
    generator: ConditionalGenerator
    mixing: bool = True

    name = "generator-mix"

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        rows = np.empty((n, self.generator.latent_dim))
        for r in range(n):
            rows[r] = sample_generator_mix(self.generator, gen, mixing=self.mixing)
        return SampleBatch(inputs=rows)

    def provenance(self) -> str:
        return "generator-mix" if self.mixing else "generator-nomix"


@dataclass
class UnionSampler(TransferSampler):
    """Per-row choice among component samplers with fixed probabilities."""

    components: list          # [(sampler, weight), ...]

    name = "union"

    def __post_init__(self):
        if not self.components:
            raise ConfigError("union sampler needs at least one component")
        weights = np.array([w for _, w in self.components], dtype=np.float64)
        if weights.min() <= 0:
            raise ConfigError("union weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigError("union weights must sum to 1")

    def sample(self, n, gen) -> SampleBatch:
        if n < 1:
            raise ConfigError("n must be >= 1")
        weights = np.array([w for _, w in self.components])
        choice = gen.choice(len(self.components), size=n, p=weights)
        dim = self._component_dim()
        rows = np.empty((n, dim))
        for k, (sampler, _) in enumerate(self.components):
            mask = choice == k
            count = int(mask.sum())
            if count:
                rows[mask] = sampler.sample(count, gen).inputs
        return SampleBatch(inputs=rows)

    def _component_dim(self):
        sampler = self.components[0][0]
        if isinstance(sampler, GaussianImageSampler):
            return sampler.dim
        if isinstance(sampler, GeneratorMixSampler):
            return sampler.generator.latent_dim
        return sampler.dataset.dim

    def provenance(self) -> str:
        parts = ",".join(f"{s.provenance()}:{w:g}" for s, w in self.components)
        return f"union({parts})"


def union_sample(components, n, gen) -> SampleBatch:
    """Functional form of UnionSampler for one-off draws."""
    return UnionSampler(components=list(components)).sample(n, gen)


def importance_weights(dataset: Dataset) -> np.ndarray:
    """Per-sample probabilities inversely proportional to class population."""
    if dataset.labels is None:
        raise DataError("importance weights require class labels")
    counts = dataset.class_counts
    if counts.min() < 1:
        raise DataError("every class must be nonempty")
    w = 1.0 / counts[dataset.labels]
    return w / w.sum()
