"""Flat key=value experiment configuration.

The format is one `section.key=value` per line, `#` comments, blank lines
ignored. Every key has a default and unknown keys are rejected, so a config
file only states what it changes. The resolved configuration (defaults plus
overrides) canonicalizes to sorted key=value text whose SHA-256 prefix tags
every result row.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import ConfigError


def _parse_bool(text):
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected boolean, got {text!r}")


def _parse_int_list(text):
    return tuple(int(v) for v in text.split(",") if v != "")


def _parse_float_list(text):
    return tuple(float(v) for v in text.split(",") if v != "")


def _parse_schedule(text):
    """Step decays as "epoch:mult,epoch:mult"; empty means no decay."""
    if not text:
        return ()
    out = []
    for item in text.split(","):
        epoch, _, mult = item.partition(":")
        if not mult:
            raise ConfigError(f"bad schedule entry {item!r}, want epoch:mult")
        out.append((int(epoch), float(mult)))
    return tuple(out)


_PARSERS = {
    bool: _parse_bool,
    int: int,
    float: float,
    str: lambda s: s,
}

# key -> (default, parser). Parser None means "type of default".
DEFAULTS = {
    "experiment.id": ("", None),
    "seeds": ((0,), _parse_int_list),
    "out": ("results", None),
    "figures": (True, None),

    "eval.topk": (5, None),
    "eval.error": ("euclidean", None),

    "dataset.kind": ("blobs", None),          # blobs | hetero
    "dataset.classes": (10, None),
    "dataset.dim": (16, None),
    "dataset.per_class": (200, None),
    "dataset.spread": (1.8, None),
    "dataset.center_scale": (2.0, None),
    "dataset.n": (1600, None),                 # hetero sample count
    "dataset.input_dim": (2, None),            # hetero input dim
    "dataset.noise_fn": ("sinusoidal", None),
    "dataset.eval_fraction": (0.25, None),
    "dataset.teacher_fraction": (0.5, None),   # 1.0 trains on the whole pool
    "dataset.imbalance_classes": (0, None),    # 0 disables imbalance
    "dataset.imbalance_keep": (0.1, None),

    "teacher.hidden": ((64,), _parse_int_list),
    "teacher.activation": ("relu", None),
    "teacher.members": (1, None),
    "teacher.epochs": (150, None),
    "teacher.lr": (0.1, None),
    "teacher.momentum": (0.9, None),
    "teacher.weight_decay": (1e-2, None),
    "teacher.batch_size": (64, None),
    "teacher.schedule": ((), _parse_schedule),
    "teacher.path": ("", None),                # default {out}/teacher_seed{seed}.model

    "student.hidden": ((8,), _parse_int_list),
    "student.activation": ("relu", None),
    "student.epochs": (400, None),
    "student.lr": (0.05, None),
    "student.momentum": (0.9, None),
    "student.weight_decay": (0.0, None),
    "student.batch_size": (16, None),
    "student.schedule": (((250, 0.2), (350, 0.2)), _parse_schedule),

    "loss.kind": ("kd", None),                 # ce | kd | gaussian-nll | gaussian-kl
    "loss.temperature": (1.0, None),
    "loss.target": ("teacher", None),
    "loss.kd_gt_weight": (0.0, None),
    "loss.kl_dim_scaled": (False, None),
    "loss.label_smoothing": (0.0, None),

    "sampler.kind": ("empirical", None),
    "sampler.noise_sigma": (0.1414213562373095, None),   # sqrt(0.02)
    "sampler.grid": ("4x4", None),
    "sampler.replace": (True, None),
    "sampler.importance": (False, None),
    "transfer.n": (0, None),                   # 0 means "empirical base size"
    "transfer.base": ("a", None),              # distill from split a or b
    "observation.half_s": (False, None),

    "sweep.temperatures": ((1.0, 1.5, 2.0, 5.0, 10.0), _parse_float_list),
    "sweep.smoothing": ((0.1, 0.18, 0.4, 0.8), _parse_float_list),
    "sweep.fractions": ((1.0, 0.25, 0.0625, 0.015625), _parse_float_list),
    "sweep.samplers": ("gaussian-image,noise,mix,generator-nomix,generator-mix", None),

    "curve.lambdas": ((0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
                      _parse_float_list),
    "curve.pairs": (256, None),
}


def _value_to_text(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):  # schedule
            return ",".join(f"{e}:{m:g}" for e, m in value)
        return ",".join(
            format(v, "g") if isinstance(v, float) else str(v) for v in value
        )
    if isinstance(value, float):
        return format(value, "g")
    return str(value)


@dataclass
class ExperimentConfig:
    """Resolved configuration with attribute-free dict access."""

    values: dict

    def __getitem__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}")

    def get(self, key):
        return self[key]

    def with_overrides(self, **pairs) -> "ExperimentConfig":
        merged = dict(self.values)
        for key, value in pairs.items():
            key = key.replace("__", ".")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
        return ExperimentConfig(values=merged)

    def canonical_text(self) -> str:
        lines = [f"{k}={_value_to_text(self.values[k])}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:12]


def default_config() -> ExperimentConfig:
    return ExperimentConfig(values={k: v for k, (v, _) in DEFAULTS.items()})


def parse_config_text(text, source="<config>") -> ExperimentConfig:
    values = {k: v for k, (v, _) in DEFAULTS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        default, parser = DEFAULTS[key]
        if parser is None:
            parser = _PARSERS[type(default)]
        try:
            values[key] = parser(value_text)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}")
    return ExperimentConfig(values=values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(text, source=str(path))
