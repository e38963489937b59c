"""Dense feedforward networks with exact analytic gradients and SGD training.

Deliberately small: fully connected layers, ReLU or Tanh hidden activations,
and two output heads. The Logits head emits c raw class scores; the Gaussian
head emits d+1 raw values read as (mu in R^d, s = log variance). Training is
single-threaded plain SGD with momentum, explicit (non-decoupled) weight
decay, and an optional step-decay schedule. Everything is deterministic
given the Rng.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .errors import ConfigError, NumericError, ShapeError
from .losses import LossKind, LossSpec
from .rng import Rng


@dataclass(frozen=True)
class Head:
    """Output head: kind 'logits' with c classes or 'gaussian' with d targets."""

    kind: str
    size: int  # c for logits, d (target dim) for gaussian

    def __post_init__(self):
        if self.kind not in ("logits", "gaussian"):
            raise ConfigError(f"unknown head kind {self.kind!r}")
        if self.size < 1:
            raise ConfigError("head size must be >= 1")
        if self.kind == "gaussian" and self.size < 1:
            raise ConfigError("gaussian head needs d >= 1")

    @property
    def raw_dim(self) -> int:
        # Gaussian head carries one extra output for the log-variance.
        return self.size if self.kind == "logits" else self.size + 1


def logits_head(num_classes: int) -> Head:
    return Head("logits", num_classes)


def gaussian_head(target_dim: int) -> Head:
    return Head("gaussian", target_dim)


@dataclass
class Network:
    """Parameter container; weights[l] has shape (out, in), biases[l] (out,)."""

    layer_dims: tuple[int, ...]     # raw dims: input, hidden..., raw output
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str
    head: Head

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ConfigError("need at least input and output dims")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("layer count mismatch")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l + 1], dims[l]):
                raise ShapeError(f"weight {l} shape {w.shape} != {(dims[l + 1], dims[l])}")
            if b.shape != (dims[l + 1],):
                raise ShapeError(f"bias {l} shape {b.shape} != {(dims[l + 1],)}")
        if dims[-1] != self.head.raw_dim:
            raise ConfigError(
                f"head expects {self.head.raw_dim} raw outputs, network has {dims[-1]}"
            )
        self.layer_dims = dims

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Network":
        return Network(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            head=self.head,
        )

    def params(self):
        """Flat list of parameter arrays, weights then bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def init_network(layer_dims, activation, head: Head, rng: Rng) -> Network:
    """Fan-in-scaled uniform init: W ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)), b = 0.

    `layer_dims` ends with the head's nominal size (c for logits, d for
    gaussian); the raw final layer gets d+1 units for the gaussian head.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ConfigError("layer_dims needs at least input and output entries")
    if any(d < 1 for d in dims):
        raise ConfigError("all layer dims must be >= 1")
    if head.kind == "logits" and dims[-1] != head.size:
        raise ConfigError("logits head size must equal the final layer dim")
    if head.kind == "gaussian" and dims[-1] != head.size:
        raise ConfigError("gaussian head target dim must equal the final layer dim")
    raw_dims = dims[:-1] + [head.raw_dim]
    gen = rng.substream("init")
    weights, biases = [], []
    for l in range(len(raw_dims) - 1):
        fan_in = raw_dims[l]
        bound = np.sqrt(1.0 / fan_in)
        weights.append(gen.uniform(-bound, bound, size=(raw_dims[l + 1], raw_dims[l])))
        biases.append(np.zeros(raw_dims[l + 1]))
    return Network(
        layer_dims=tuple(raw_dims),
        weights=weights,
        biases=biases,
        activation=activation,
        head=head,
    )


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z, a, kind):
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _forward_pass(net: Network, batch):
    """Returns (activations, pre-activations); activations[0] is the input."""
    h = batch
    acts = [h]
    zs = []
    last = net.num_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        zs.append(z)
        h = z if l == last else _activate(z, net.activation)
        acts.append(h)
    return acts, zs


def forward(net: Network, batch, threads: int | None = None):
    """Raw outputs for a batch; (n, in) -> (n, raw_out).

    `threads` > 1 splits rows across a thread pool (forward only, output
    order preserved); defaults to the XCL_THREADS environment variable.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError("batch must be a 2-D matrix")
    if batch.shape[1] != net.input_dim:
        raise ShapeError(f"batch dim {batch.shape[1]} != input dim {net.input_dim}")
    if threads is None:
        threads = int(os.environ.get("XCL_THREADS", "1"))
    n = batch.shape[0]
    if threads <= 1 or n < 2 * threads:
        return _forward_pass(net, batch)[0][-1]
    out = np.empty((n, net.layer_dims[-1]))
    bounds = np.linspace(0, n, threads + 1, dtype=int)
    def run(k):
        lo, hi = bounds[k], bounds[k + 1]
        out[lo:hi] = _forward_pass(net, batch[lo:hi])[0][-1]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, range(threads)))
    return out


@dataclass
class ParamGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def scaled(self, factor) -> "ParamGrads":
        return ParamGrads(
            weights=[w * factor for w in self.weights],
            biases=[b * factor for b in self.biases],
        )


def backward(net: Network, batch, upstream_grad) -> ParamGrads:
    """Exact gradients of sum(outputs * upstream_grad) w.r.t. all parameters."""
    batch = np.asarray(batch, dtype=np.float64)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError("batch shape incompatible with network input")
    if upstream_grad.shape != (batch.shape[0], net.layer_dims[-1]):
        raise ShapeError(
            f"upstream grad {upstream_grad.shape} != {(batch.shape[0], net.layer_dims[-1])}"
        )
    acts, zs = _forward_pass(net, batch)
    n_layers = net.num_layers
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = upstream_grad
    for l in range(n_layers - 1, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * _activate_grad(
                zs[l - 1], acts[l], net.activation
            )
    return ParamGrads(weights=grads_w, biases=grads_b)


@dataclass
class OptimizerState:
    """SGD with momentum; weight decay enters the gradient (not decoupled)."""

    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    schedule: tuple = ()            # ((epoch, multiplier), ...) applied at epoch start
    velocity: list | None = None    # optional warm-start buffers

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be nonnegative")
        self.schedule = tuple((int(e), float(m)) for e, m in self.schedule)


@dataclass
class TrainingData:
    """Array bundle the training loop consumes.

    Only the fields relevant to the chosen loss need to be present:
    `target_probs` for soft cross-entropy, teacher fields for distillation,
    `targets` for regression ground truth, `labels` for the optional
    ground-truth term inside blended KD.
    """

    inputs: np.ndarray
    target_probs: np.ndarray | None = None
    teacher_probs: np.ndarray | None = None
    teacher_logits: np.ndarray | None = None
    teacher_mu: np.ndarray | None = None
    teacher_s: np.ndarray | None = None
    targets: np.ndarray | None = None
    labels: np.ndarray | None = None
    num_classes: int | None = None
    sample_weights: np.ndarray | None = None  # importance-sampling probabilities

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ShapeError("training inputs must be a nonempty matrix")
        n = self.inputs.shape[0]
        for name in ("target_probs", "teacher_probs", "teacher_logits",
                     "teacher_mu", "targets"):
            arr = getattr(self, name)
            if arr is not None and np.asarray(arr).shape[0] != n:
                raise ShapeError(f"{name} row count differs from inputs")
        if self.sample_weights is not None:
            w = np.asarray(self.sample_weights, dtype=np.float64)
            if w.shape != (n,) or w.min() < 0 or w.sum() <= 0:
                raise ShapeError("sample_weights must be nonnegative with positive sum")
            self.sample_weights = w / w.sum()

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def batch(self, idx) -> "TrainingData":
        take = lambda a: None if a is None else np.asarray(a)[idx]
        return TrainingData(
            inputs=self.inputs[idx],
            target_probs=take(self.target_probs),
            teacher_probs=take(self.teacher_probs),
            teacher_logits=take(self.teacher_logits),
            teacher_mu=take(self.teacher_mu),
            teacher_s=take(self.teacher_s),
            targets=take(self.targets),
            labels=take(self.labels),
            num_classes=self.num_classes,
        )


class OnlineSource:
    """Per-batch data generator for sampler-driven (expected-risk) training.

    Subclasses implement draw(m, gen) returning a TrainingData batch; the
    training loop asks for `batches_per_epoch` draws per epoch.
    """

    batches_per_epoch = 16

    def draw(self, m, gen) -> TrainingData:  # pragma: no cover - interface
        raise NotImplementedError


def check_loss_compatible(spec: LossSpec, head: Head) -> None:
    categorical = spec.kind in (LossKind.CROSS_ENTROPY_SOFT, LossKind.KD_CATEGORICAL)
    if categorical and head.kind != "logits":
        raise ConfigError(f"{spec.kind.value} loss requires a logits head")
    if not categorical and head.kind != "gaussian":
        raise ConfigError(f"{spec.kind.value} loss requires a gaussian head")


def _split_gaussian_raw(raw):
    return raw[:, :-1], raw[:, -1]


def batch_objective(spec: LossSpec, raw, batch: TrainingData):
    """Summed loss over the batch plus gradient w.r.t. the raw outputs."""
    if spec.kind == LossKind.CROSS_ENTROPY_SOFT:
        target = batch.target_probs
        if target is None:
            raise ConfigError("cross-entropy needs target_probs")
        loss, grad = losses.cross_entropy_soft(raw, target)
        return float(np.sum(loss)), grad
    if spec.kind == LossKind.KD_CATEGORICAL:
        if batch.teacher_probs is None:
            raise ConfigError("categorical KD needs teacher probabilities")
        loss, grad = losses.kd_categorical(
            batch.teacher_probs, raw,
            temperature=spec.temperature,
            teacher_logits=batch.teacher_logits,
        )
        if spec.kd_gt_weight > 0.0:
            if batch.labels is None:
                raise ConfigError("kd_gt_weight > 0 needs ground-truth labels")
            onehot = losses.one_hot(batch.labels, raw.shape[1])
            ce_loss, ce_grad = losses.cross_entropy_soft(raw, onehot)
            w = spec.kd_gt_weight
            loss = (1.0 - w) * loss + w * ce_loss
            grad = (1.0 - w) * grad + w * ce_grad
        return float(np.sum(loss)), grad
    if spec.kind == LossKind.GAUSSIAN_NLL:
        mu, s = _split_gaussian_raw(raw)
        target = batch.targets if spec.target == "ground-truth" else batch.teacher_mu
        if target is None:
            raise ConfigError(f"gaussian NLL with {spec.target} target lacks data")
        loss, gmu, gs = losses.gaussian_nll(mu, s, target)
        return float(np.sum(loss)), np.column_stack([gmu, gs])
    if spec.kind == LossKind.GAUSSIAN_KL:
        if batch.teacher_mu is None or batch.teacher_s is None:
            raise ConfigError("gaussian KL needs teacher mu and s")
        mu, s = _split_gaussian_raw(raw)
        loss, gmu, gs = losses.gaussian_kl(
            batch.teacher_mu, batch.teacher_s, mu, s, dim_scaled=spec.kl_dim_scaled
        )
        return float(np.sum(loss)), np.column_stack([gmu, gs])
    raise ConfigError(f"unhandled loss kind {spec.kind}")


def train(net: Network, data, spec: LossSpec, opt: OptimizerState,
          epochs, batch_size, rng: Rng):
    """SGD training loop; returns (trained copy, per-epoch mean loss trace).

    `data` is either a TrainingData bundle (empirical objective; reshuffled
    each epoch, last partial batch kept, optional importance sampling via
    sample_weights) or an OnlineSource (expected-risk objective; fresh
    batches drawn every step). The update is

        v <- momentum*v - lr*(grad + weight_decay*param);  param <- param + v

    and the input network is never mutated. epochs = 0 returns an identical
    copy.
    """
    if epochs < 0:
        raise ConfigError("epochs must be >= 0")
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    check_loss_compatible(spec, net.head)
    online = isinstance(data, OnlineSource)
    if not online and data.inputs.shape[1] != net.input_dim:
        raise ShapeError("training inputs incompatible with network input dim")

    model = net.copy()
    params = model.params()
    if opt.velocity is not None:
        if len(opt.velocity) != len(params) or any(
            v.shape != p.shape for v, p in zip(opt.velocity, params)
        ):
            raise ConfigError("velocity buffers do not shape-match parameters")
        velocity = [v.copy() for v in opt.velocity]
    else:
        velocity = [np.zeros_like(p) for p in params]

    shuffle_gen = rng.substream("shuffle")
    sample_gen = rng.substream("sampling")
    lr = opt.learning_rate
    trace = []
    for epoch in range(epochs):
        for at_epoch, mult in opt.schedule:
            if at_epoch == epoch:
                lr *= mult
        loss_sum = 0.0
        count = 0
        for xb, batch in _epoch_batches(data, batch_size, online, shuffle_gen, sample_gen):
            raw = _forward_pass(model, xb)[0][-1]
            batch_loss, grad_raw = batch_objective(spec, raw, batch)
            m = xb.shape[0]
            grads = backward(model, xb, grad_raw / m)
            flat_grads = []
            for gw, gb in zip(grads.weights, grads.biases):
                flat_grads.extend((gw, gb))
            for p, v, g in zip(params, velocity, flat_grads):
                v *= opt.momentum
                v -= lr * (g + opt.weight_decay * p)
                p += v
            loss_sum += batch_loss
            count += m
        mean_loss = loss_sum / max(count, 1)
        if not np.isfinite(mean_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        trace.append(mean_loss)
    return model, trace


def _epoch_batches(data, batch_size, online, shuffle_gen, sample_gen):
    if online:
        for _ in range(data.batches_per_epoch):
            batch = data.draw(batch_size, sample_gen)
            yield batch.inputs, batch
        return
    n = data.n
    if data.sample_weights is not None:
        order = sample_gen.choice(n, size=n, replace=True, p=data.sample_weights)
    else:
        order = shuffle_gen.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield data.inputs[idx], data.batch(idx)
