"""End-to-end experiment pipelines behind the CLI subcommands.

Each run_* function executes one study over every seed in the config and
returns ResultRows. Pipelines share the same skeleton: regenerate the
synthetic dataset from (config, seed), carve out an evaluation split, train
or load a teacher on split A, train students against some transfer source,
and measure everything on the held-out evaluation set.
"""

from __future__ import annotations

import os

import numpy as np

from .analysis import (
    evaluate,
    split_by_entropy,
    uncertainty_vs_lambda,
    zero_accuracy_subset,
)
from .config import ExperimentConfig
from .datasets import (
    Dataset,
    make_blobs,
    make_heteroscedastic_regression,
    split_disjoint,
    subsample_imbalanced,
)
from .errors import ArtifactError, ConfigError
from .losses import (
    LossKind,
    LossSpec,
    label_smooth,
    normalized_entropy,
    one_hot,
    smoothed_targets,
    softmax,
)
from .nn_core import (
    OnlineSource,
    OptimizerState,
    TrainingData,
    gaussian_head,
    init_network,
    logits_head,
    train,
)
from .results import ResultRow
from .rng import Rng
from .samplers import (
    CutMixSampler,
    EmpiricalSampler,
    GaussianImageSampler,
    GeneratorMixSampler,
    MixSampler,
    NoiseAugmentSampler,
    UnionSampler,
    _cutmix,
    fit_toy_generator,
    importance_weights,
)
from .teacher import (
    Teacher,
    load_teacher,
    materialize_transfer_set,
    save_teacher,
    teacher_predict,
)

REGRESSION_TARGET_DIM = 2


# ---------------------------------------------------------------------------
# Shared plumbing.
# ---------------------------------------------------------------------------


def build_dataset(cfg: ExperimentConfig, seed) -> Dataset:
    rng = Rng(seed).child("dataset")
    kind = cfg["dataset.kind"]
    if kind == "blobs":
        return make_blobs(
            cfg["dataset.classes"],
            cfg["dataset.dim"],
            cfg["dataset.per_class"],
            cfg["dataset.spread"],
            cfg["dataset.center_scale"],
            rng,
        )
    if kind == "hetero":
        return make_heteroscedastic_regression(
            cfg["dataset.n"], cfg["dataset.input_dim"], cfg["dataset.noise_fn"], rng
        )
    raise ConfigError(f"unknown dataset kind {kind!r}")


def base_splits(cfg, dataset: Dataset, seed):
    """(split A, split B or None, eval split). Imbalance applies to the pool."""
    rng = Rng(seed)
    balanced = dataset.label_kind == "class"
    pool, eval_set = split_disjoint(
        dataset, 1.0 - cfg["dataset.eval_fraction"], balanced, rng.child("eval-split")
    )
    if cfg["dataset.imbalance_classes"] > 0:
        if not balanced:
            raise ConfigError("class imbalance requires a classification dataset")
        pool = subsample_imbalanced(
            pool,
            cfg["dataset.imbalance_classes"],
            cfg["dataset.imbalance_keep"],
            rng.child("imbalance"),
        )
    fraction = cfg["dataset.teacher_fraction"]
    if fraction >= 1.0:
        return pool, None, eval_set
    a_set, b_set = split_disjoint(pool, fraction, balanced, rng.child("ab-split"))
    return a_set, b_set, eval_set


def _optimizer(cfg, prefix) -> OptimizerState:
    return OptimizerState(
        learning_rate=cfg[f"{prefix}.lr"],
        momentum=cfg[f"{prefix}.momentum"],
        weight_decay=cfg[f"{prefix}.weight_decay"],
        schedule=cfg[f"{prefix}.schedule"],
    )


def _net_spec(cfg, prefix, dataset: Dataset):
    hidden = list(cfg[f"{prefix}.hidden"])
    if dataset.label_kind == "class":
        head = logits_head(dataset.num_classes)
        dims = [dataset.dim] + hidden + [dataset.num_classes]
    else:
        head = gaussian_head(REGRESSION_TARGET_DIM)
        dims = [dataset.dim] + hidden + [REGRESSION_TARGET_DIM]
    return dims, cfg[f"{prefix}.activation"], head


def _ground_truth_data(dataset: Dataset, smoothing=0.0, sample_weights=None) -> TrainingData:
    if dataset.label_kind == "class":
        return TrainingData(
            inputs=dataset.features,
            target_probs=smoothed_targets(dataset.labels, dataset.num_classes, smoothing),
            labels=dataset.labels,
            num_classes=dataset.num_classes,
            sample_weights=sample_weights,
        )
    return TrainingData(inputs=dataset.features, targets=dataset.targets,
                        sample_weights=sample_weights)


def train_teacher_model(cfg, a_set: Dataset, seed) -> Teacher:
    """Train the configured single-model or ensemble teacher on split A."""
    rng = Rng(seed)
    dims, activation, head = _net_spec(cfg, "teacher", a_set)
    if a_set.label_kind == "class":
        spec = LossSpec(kind=LossKind.CROSS_ENTROPY_SOFT, target="ground-truth")
    else:
        spec = LossSpec(kind=LossKind.GAUSSIAN_NLL, target="ground-truth")
    data = _ground_truth_data(a_set)
    members = []
    for m in range(cfg["teacher.members"]):
        member_rng = rng.child(f"teacher-{m}")
        net = init_network(dims, activation, head, member_rng)
        trained, _ = train(
            net, data, spec, _optimizer(cfg, "teacher"),
            cfg["teacher.epochs"], cfg["teacher.batch_size"], member_rng,
        )
        members.append(trained)
    return Teacher(members=members)


def teacher_file_path(cfg, seed) -> str:
    pattern = cfg["teacher.path"] or os.path.join(cfg["out"], "teacher_seed{seed}.model")
    return pattern.format(seed=seed)


# ---------------------------------------------------------------------------
# Student methods.
# ---------------------------------------------------------------------------


class MixingSource(OnlineSource):
    """Online MixUp/CutMix baseline: blended inputs with blended one-hots."""

    def __init__(self, dataset: Dataset, batches_per_epoch, cutmix_grid=None,
                 weights=None):
        self.dataset = dataset
        self.batches_per_epoch = batches_per_epoch
        self.cutmix_grid = cutmix_grid
        self.weights = weights

    def draw(self, m, gen) -> TrainingData:
        ds = self.dataset
        i = gen.choice(ds.n, size=m, p=self.weights)
        j = gen.choice(ds.n, size=m, p=self.weights)
        lam = gen.uniform(0.0, 1.0, size=m)
        onehots = one_hot(ds.labels, ds.num_classes)
        if self.cutmix_grid is None:
            inputs = (lam[:, None] * ds.features[i]
                      + (1.0 - lam[:, None]) * ds.features[j])
            label_lam = lam
        else:
            h, w = self.cutmix_grid
            inputs = np.empty((m, ds.dim))
            label_lam = np.empty(m)
            for r in range(m):
                inputs[r], label_lam[r] = _cutmix(
                    ds.features[i[r]], ds.features[j[r]], lam[r], h, w, gen
                )
        targets = (label_lam[:, None] * onehots[i]
                   + (1.0 - label_lam[:, None]) * onehots[j])
        return TrainingData(inputs=inputs, target_probs=targets,
                            num_classes=ds.num_classes)


def resolve_method(cfg, dataset_kind) -> str:
    """Map (loss, sampler, target) config onto a canonical method name."""
    loss = cfg["loss.kind"]
    sampler = cfg["sampler.kind"]
    suffix = "+imp" if cfg["sampler.importance"] else ""
    if dataset_kind == "class":
        if loss == "ce":
            base = {
                "empirical": "erm-ls" if cfg["loss.label_smoothing"] > 0 else "erm",
                "mix": "erm-mixup",
                "cutmix": "erm-cutmix",
            }.get(sampler)
        elif loss == "kd":
            base = {
                "empirical": "kd",
                "mix": "xcl-mix",
                "cutmix": "xcl-cutmix",
                "noise": "xcl-noise",
                "gaussian-image": "xcl-gaussian-image",
                "generator-mix": "xcl-gen",
                "generator-nomix": "xcl-gen-nomix",
                "union": "xcl-union",
            }.get(sampler)
        else:
            base = None
    else:
        if loss == "gaussian-nll" and cfg["loss.target"] == "ground-truth":
            base = "erm"
        elif loss == "gaussian-nll":
            base = "kd"
        elif loss == "gaussian-kl":
            base = {"empirical": "kd-uncertainty", "mix": "xcl-mix"}.get(sampler)
        else:
            base = None
    if base is None:
        raise ConfigError(
            f"no method for loss={loss} sampler={sampler} on {dataset_kind} data"
        )
    return base + suffix


def _build_sampler(method, base: Dataset, cfg, n):
    imp = importance_weights(base) if method.endswith("+imp") else None
    core = method.removesuffix("+imp")
    if core in ("kd", "kd-uncertainty"):
        if imp is not None:
            return EmpiricalSampler(dataset=base, replace=True, weights=imp)
        # Drawing exactly the base without replacement is classic KD on the
        # training set; larger requests fall back to with-replacement draws.
        return EmpiricalSampler(dataset=base, replace=n > base.n)
    if core == "xcl-mix":
        return MixSampler(dataset=base, weights=imp)
    if core == "xcl-cutmix":
        return CutMixSampler(dataset=base, grid_hw=_parse_grid(cfg["sampler.grid"]))
    if core == "xcl-noise":
        return NoiseAugmentSampler(dataset=base, sigma=cfg["sampler.noise_sigma"])
    if core == "xcl-gaussian-image":
        return GaussianImageSampler(dim=base.dim)
    if core == "xcl-gen":
        return GeneratorMixSampler(generator=fit_toy_generator(base))
    if core == "xcl-gen-nomix":
        return GeneratorMixSampler(generator=fit_toy_generator(base), mixing=False)
    if core == "xcl-union":
        return UnionSampler(components=[
            (EmpiricalSampler(dataset=base), 0.5),
            (GeneratorMixSampler(generator=fit_toy_generator(base)), 0.5),
        ])
    raise ConfigError(f"no sampler for method {method!r}")


def _parse_grid(text):
    h, _, w = text.partition("x")
    try:
        return int(h), int(w)
    except ValueError:
        raise ConfigError(f"bad grid spec {text!r}, want HxW")


def _transfer_count(cfg, base: Dataset) -> int:
    n = cfg["transfer.n"]
    return base.n if n <= 0 else n


def _kd_spec(cfg, kind=LossKind.KD_CATEGORICAL) -> LossSpec:
    return LossSpec(
        kind=kind,
        temperature=cfg["loss.temperature"],
        kd_gt_weight=cfg["loss.kd_gt_weight"],
        kl_dim_scaled=cfg["loss.kl_dim_scaled"],
    )


def train_student(method, teacher, base: Dataset, cfg, rng: Rng):
    """Train one student by method name; returns (network, transfer entropy).

    Transfer entropy is the average normalized entropy of the training
    targets (0 for plain one-hot ERM, the smoothed-label entropy for LS,
    measured on a probe batch for online mixing sources, and the mean
    teacher soft-label entropy at the training temperature for KD/XCL).
    None for regression methods, where entropy is undefined.
    """
    core = method.removesuffix("+imp")
    dims, activation, head = _net_spec(cfg, "student", base)
    net = init_network(dims, activation, head, rng.child("init"))
    opt = _optimizer(cfg, "student")
    epochs = cfg["student.epochs"]
    batch_size = cfg["student.batch_size"]
    train_rng = rng.child("train")
    classification = base.label_kind == "class"

    if core in ("erm", "erm-ls"):
        weights = importance_weights(base) if method.endswith("+imp") else None
        if classification:
            eps = cfg["loss.label_smoothing"] if core == "erm-ls" else 0.0
            data = _ground_truth_data(base, smoothing=eps, sample_weights=weights)
            spec = LossSpec(kind=LossKind.CROSS_ENTROPY_SOFT, target="ground-truth")
            entropy = 0.0 if eps == 0.0 else float(
                normalized_entropy(label_smooth(0, base.num_classes, eps))
            )
        else:
            data = _ground_truth_data(base, sample_weights=weights)
            spec = LossSpec(kind=LossKind.GAUSSIAN_NLL, target="ground-truth")
            entropy = None
        student, _ = train(net, data, spec, opt, epochs, batch_size, train_rng)
        return student, entropy

    if core in ("erm-mixup", "erm-cutmix"):
        weights = importance_weights(base) if method.endswith("+imp") else None
        grid = _parse_grid(cfg["sampler.grid"]) if core == "erm-cutmix" else None
        source = MixingSource(
            base,
            batches_per_epoch=max(1, int(np.ceil(base.n / batch_size))),
            cutmix_grid=grid,
            weights=weights,
        )
        spec = LossSpec(kind=LossKind.CROSS_ENTROPY_SOFT, target="ground-truth")
        student, _ = train(net, source, spec, opt, epochs, batch_size, train_rng)
        probe = source.draw(512, rng.substream("entropy-probe"))
        entropy = float(np.mean(normalized_entropy(probe.target_probs)))
        return student, entropy

    # Distillation methods: materialize a transfer set and match the teacher.
    n_transfer = _transfer_count(cfg, base)
    sampler = _build_sampler(method, base, cfg, n_transfer)
    tset = materialize_transfer_set(teacher, sampler, n_transfer, rng.child("transfer"))
    if classification:
        data = TrainingData(
            inputs=tset.inputs,
            teacher_probs=tset.outputs.probs,
            teacher_logits=tset.outputs.logits,
            labels=tset.truth_labels,
            num_classes=base.num_classes,
        )
        spec = _kd_spec(cfg)
        temp_probs = softmax(tset.outputs.logits, spec.temperature)
        entropy = float(np.mean(normalized_entropy(temp_probs)))
    else:
        if core == "kd":
            data = TrainingData(inputs=tset.inputs, teacher_mu=tset.outputs.mu)
            spec = LossSpec(kind=LossKind.GAUSSIAN_NLL, target="teacher")
        else:
            data = TrainingData(
                inputs=tset.inputs,
                teacher_mu=tset.outputs.mu,
                teacher_s=tset.outputs.s,
            )
            spec = _kd_spec(cfg, kind=LossKind.GAUSSIAN_KL)
        entropy = None
    student, _ = train(net, data, spec, opt, epochs, batch_size, train_rng)
    return student, entropy


# ---------------------------------------------------------------------------
# Row helpers.
# ---------------------------------------------------------------------------


def _experiment_id(cfg, default):
    return cfg["experiment.id"] or default


def _metric_rows(exp, seed, method, cfg, report):
    rows = []
    if report.top1 is not None:
        rows.append(ResultRow(exp, seed, method, "top1", report.top1, cfg.hash()))
        rows.append(ResultRow(exp, seed, method, "topk", report.topk, cfg.hash()))
    if report.mean_error is not None:
        rows.append(ResultRow(exp, seed, method, "mean_error", report.mean_error, cfg.hash()))
    return rows


def _student_rows(exp, seed, method, cfg, teacher, base, eval_set, rng, row_name=None):
    """Train one student and emit its metric rows.

    `method` drives the training recipe; `row_name` (default: method) is the
    label written into the result rows, e.g. "kd-h" or "kd@T=2".
    """
    row_name = row_name or method
    student, entropy = train_student(method, teacher, base, cfg, rng)
    report = evaluate(student, eval_set, k=cfg["eval.topk"], error_kind=cfg["eval.error"])
    rows = _metric_rows(exp, seed, row_name, cfg, report)
    if entropy is not None:
        rows.append(ResultRow(exp, seed, row_name, "transfer_entropy", entropy, cfg.hash()))
    return rows, report


# ---------------------------------------------------------------------------
# Subcommand pipelines.
# ---------------------------------------------------------------------------


def run_train_teacher(cfg) -> list:
    exp = _experiment_id(cfg, "train-teacher")
    rows = []
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, _, eval_set = base_splits(cfg, dataset, seed)
        teacher = train_teacher_model(cfg, a_set, seed)
        path = teacher_file_path(cfg, seed)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        save_teacher(teacher, path)
        report = evaluate(teacher, eval_set, k=cfg["eval.topk"], error_kind=cfg["eval.error"])
        rows.extend(_metric_rows(exp, seed, "teacher", cfg, report))
        if report.avg_entropy is not None:
            rows.append(ResultRow(exp, seed, "teacher", "avg_entropy",
                                  report.avg_entropy, cfg.hash()))
    return rows


def _load_teacher_for(cfg, seed) -> Teacher:
    path = teacher_file_path(cfg, seed)
    if not os.path.exists(path):
        raise ArtifactError(f"teacher model not found: {path}")
    return load_teacher(path)


def run_distill(cfg) -> list:
    exp = _experiment_id(cfg, "distill")
    rows = []
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, b_set, eval_set = base_splits(cfg, dataset, seed)
        if cfg["transfer.base"] == "b":
            if b_set is None:
                raise ConfigError("transfer.base=b needs dataset.teacher_fraction < 1")
            base = b_set
        elif cfg["transfer.base"] == "a":
            base = a_set
        else:
            raise ConfigError(f"unknown transfer.base {cfg['transfer.base']!r}")
        teacher = _load_teacher_for(cfg, seed)
        method = resolve_method(cfg, dataset.label_kind)
        teacher_report = evaluate(teacher, eval_set, k=cfg["eval.topk"],
                                  error_kind=cfg["eval.error"])
        rows.extend(_metric_rows(exp, seed, "teacher", cfg, teacher_report))
        student_rows, report = _student_rows(
            exp, seed, method, cfg, teacher, base, eval_set,
            Rng(seed).child(f"student-{method}"),
        )
        rows.extend(student_rows)
        if report.top1 is not None:
            gap = teacher_report.top1 - report.top1
        else:
            gap = report.mean_error - teacher_report.mean_error
        rows.append(ResultRow(exp, seed, method, "gap", gap, cfg.hash()))
    return rows


def run_observation1(cfg) -> list:
    """Entropy-split study: students on the high- and low-entropy halves."""
    if cfg["dataset.teacher_fraction"] >= 1.0:
        raise ConfigError("observation1 needs dataset.teacher_fraction < 1")
    exp = _experiment_id(cfg, "observation1")
    rows = []
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, b_set, eval_set = base_splits(cfg, dataset, seed)
        teacher = train_teacher_model(cfg, a_set, seed)
        report = evaluate(teacher, eval_set, k=cfg["eval.topk"])
        rows.extend(_metric_rows(exp, seed, "teacher", cfg, report))
        split = split_by_entropy(teacher, b_set)
        rows.append(ResultRow(exp, seed, "transfer-h", "entropy",
                              split.avg_entropy_high, cfg.hash()))
        rows.append(ResultRow(exp, seed, "transfer-l", "entropy",
                              split.avg_entropy_low, cfg.hash()))
        for part, indices in (("h", split.high_set), ("l", split.low_set)):
            subset = b_set.subset(indices)
            for method in ("erm", "kd"):
                sub_rows, _ = _student_rows(
                    exp, seed, method, cfg, teacher, subset, eval_set,
                    Rng(seed).child(f"student-{method}-{part}"),
                    row_name=f"{method}-{part}",
                )
                rows.extend(sub_rows)
        if cfg["observation.half_s"]:
            # Optional preset: students on half of the teacher's own training
            # split, where its outputs are most overconfident.
            half_a, _ = split_disjoint(a_set, 0.5, True, Rng(seed).child("half-s"))
            half_out = teacher_predict(teacher, half_a.features)
            rows.append(ResultRow(
                exp, seed, "transfer-half-s", "entropy",
                float(np.mean(normalized_entropy(half_out.probs))), cfg.hash(),
            ))
            for method in ("erm", "kd"):
                sub_rows, _ = _student_rows(
                    exp, seed, method, cfg, teacher, half_a, eval_set,
                    Rng(seed).child(f"student-{method}-half-s"),
                    row_name=f"{method}-half-s",
                )
                rows.extend(sub_rows)
    return rows


def run_observation2(cfg) -> list:
    """Zero-teacher-accuracy subset study: ERM vs KD on the Z set."""
    if cfg["dataset.teacher_fraction"] >= 1.0:
        raise ConfigError("observation2 needs dataset.teacher_fraction < 1")
    exp = _experiment_id(cfg, "observation2")
    rows = []
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, b_set, eval_set = base_splits(cfg, dataset, seed)
        teacher = train_teacher_model(cfg, a_set, seed)
        z_idx = zero_accuracy_subset(teacher, b_set)
        if z_idx.size < 2:
            raise ConfigError(
                f"zero-accuracy subset has {z_idx.size} samples; teacher too strong"
            )
        z_set = b_set.subset(z_idx)
        z_report = evaluate(teacher, z_set, k=cfg["eval.topk"])
        rows.append(ResultRow(exp, seed, "teacher-on-z", "top1", z_report.top1, cfg.hash()))
        rows.append(ResultRow(exp, seed, "transfer-z", "entropy",
                              z_report.avg_entropy, cfg.hash()))
        rows.append(ResultRow(exp, seed, "transfer-z", "avg_truth_prob",
                              z_report.avg_truth_prob, cfg.hash()))
        for method in ("erm", "kd"):
            sub_rows, _ = _student_rows(
                exp, seed, method, cfg, teacher, z_set, eval_set,
                Rng(seed).child(f"student-{method}-z"),
                row_name=f"{method}-z",
            )
            rows.extend(sub_rows)
    return rows


SWEEP_AXES = ("temperature", "label_smoothing", "dataset_size", "imbalance", "sampler")


def run_sweep(cfg, axis) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; pick one of {SWEEP_AXES}")
    exp = _experiment_id(cfg, f"sweep-{axis}")
    rows = []
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, _, eval_set = base_splits(cfg, dataset, seed)
        teacher = train_teacher_model(cfg, a_set, seed)
        rows.extend(_metric_rows(exp, seed, "teacher", cfg,
                                 evaluate(teacher, eval_set, k=cfg["eval.topk"])))
        if axis == "temperature":
            for temp in cfg["sweep.temperatures"]:
                run_cfg = cfg.with_overrides(loss__temperature=temp)
                for method in ("kd", "xcl-mix"):
                    sub, _ = _student_rows(
                        exp, seed, method, run_cfg, teacher, a_set, eval_set,
                        Rng(seed).child(f"{method}-T{temp}"),
                        row_name=f"{method}@T={temp:g}",
                    )
                    rows.extend(sub)
        elif axis == "label_smoothing":
            for eps in cfg["sweep.smoothing"]:
                run_cfg = cfg.with_overrides(loss__label_smoothing=eps)
                sub, _ = _student_rows(
                    exp, seed, "erm-ls", run_cfg, teacher, a_set, eval_set,
                    Rng(seed).child(f"ls-{eps}"),
                    row_name=f"erm-ls@eps={eps:g}",
                )
                rows.extend(sub)
        elif axis == "dataset_size":
            for frac in cfg["sweep.fractions"]:
                if frac >= 1.0:
                    reduced = a_set
                else:
                    reduced, _ = split_disjoint(
                        a_set, frac, True, Rng(seed).child(f"frac-{frac}")
                    )
                for method in ("erm", "erm-mixup", "kd", "xcl-mix"):
                    sub, _ = _student_rows(
                        exp, seed, method, cfg, teacher, reduced, eval_set,
                        Rng(seed).child(f"{method}-frac{frac}"),
                        row_name=f"{method}@frac={frac:g}",
                    )
                    rows.extend(sub)
        elif axis == "imbalance":
            for method in ("erm", "erm-mixup", "kd", "xcl-mix"):
                for importance in (False, True):
                    name = method + ("+imp" if importance else "")
                    sub, _ = _student_rows(
                        exp, seed, name, cfg, teacher, a_set, eval_set,
                        Rng(seed).child(f"student-{name}"),
                    )
                    rows.extend(sub)
        elif axis == "sampler":
            sampler_methods = {
                "gaussian-image": "xcl-gaussian-image",
                "noise": "xcl-noise",
                "mix": "xcl-mix",
                "generator-nomix": "xcl-gen-nomix",
                "generator-mix": "xcl-gen",
                "empirical": "kd",
                "cutmix": "xcl-cutmix",
                "union": "xcl-union",
            }
            for token in cfg["sweep.samplers"].split(","):
                token = token.strip()
                if token not in sampler_methods:
                    raise ConfigError(f"unknown sampler {token!r} in sweep.samplers")
                method = sampler_methods[token]
                sub, _ = _student_rows(
                    exp, seed, method, cfg, teacher, a_set, eval_set,
                    Rng(seed).child(f"student-{method}"),
                    row_name=f"{method}@q={token}",
                )
                rows.extend(sub)
    return rows


def run_curve_uncertainty(cfg) -> list:
    """Teacher and two students' mean predicted sigma versus lambda."""
    exp = _experiment_id(cfg, "curve-uncertainty")
    if cfg["dataset.kind"] != "hetero":
        raise ConfigError("curve-uncertainty requires dataset.kind=hetero")
    if cfg["dataset.teacher_fraction"] >= 1.0:
        raise ConfigError("curve-uncertainty needs dataset.teacher_fraction < 1")
    rows = []
    grid = cfg["curve.lambdas"]
    pairs = cfg["curve.pairs"]
    for seed in cfg["seeds"]:
        dataset = build_dataset(cfg, seed)
        a_set, b_set, eval_set = base_splits(cfg, dataset, seed)
        teacher = train_teacher_model(cfg, a_set, seed)
        models = {"teacher": teacher}
        for method in ("kd-uncertainty", "xcl-mix"):
            student, _ = train_student(
                method, teacher, b_set, cfg, Rng(seed).child(f"student-{method}")
            )
            models[method] = student
        for name, model in models.items():
            curve = uncertainty_vs_lambda(
                model, eval_set, grid, pairs, Rng(seed).child(f"curve-{name}")
            )
            for lam, sigma in curve:
                rows.append(ResultRow(
                    exp, seed, name, f"sigma@lambda={lam:g}", sigma, cfg.hash()
                ))
            report = evaluate(model, eval_set, k=cfg["eval.topk"],
                              error_kind=cfg["eval.error"])
            rows.append(ResultRow(exp, seed, name, "mean_error",
                                  report.mean_error, cfg.hash()))
    return rows


def regression_methods(cfg, seed) -> dict:
    """Mean evaluation error of the ERM / KD / KD-uncertainty students.

    Library-level helper for the regression comparison (the three students
    share one teacher and one transfer base).
    """
    if cfg["dataset.kind"] != "hetero":
        raise ConfigError("regression comparison requires dataset.kind=hetero")
    dataset = build_dataset(cfg, seed)
    a_set, b_set, eval_set = base_splits(cfg, dataset, seed)
    if b_set is None:
        raise ConfigError("regression comparison needs dataset.teacher_fraction < 1")
    teacher = train_teacher_model(cfg, a_set, seed)
    errors = {}
    for method in ("erm", "kd", "kd-uncertainty"):
        student, _ = train_student(
            method, teacher, b_set, cfg, Rng(seed).child(f"student-{method}")
        )
        report = evaluate(student, eval_set, k=cfg["eval.topk"],
                          error_kind=cfg["eval.error"])
        errors[method] = report.mean_error
    errors["teacher"] = evaluate(teacher, eval_set, k=cfg["eval.topk"],
                                 error_kind=cfg["eval.error"]).mean_error
    return errors
