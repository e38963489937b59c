"""Teachers (single models or ensembles) and materialized transfer-sets.

An ensemble teacher averages its members' probability outputs (for
classification) or their (mu, s) outputs (for regression). Transfer-sets
pair sampled inputs with cached teacher outputs so distillation can run
offline; the file format round-trips every float exactly via 17-significant-
digit decimals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, _fmt, _parse_header_fields
from .errors import ConfigError, DataError, ParseError, ShapeError
from .losses import CategoricalDist, GaussianPred, softmax
from .nn_core import Head, Network, forward
from .rng import Rng
from .samplers import EmpiricalSampler, TransferSampler

_TINY = 1e-300


@dataclass
class Teacher:
    """One or more networks sharing head kind and output dimensionality."""

    members: list

    def __post_init__(self):
        if not self.members:
            raise ConfigError("ensemble must have at least one member")
        head = self.members[0].head
        for m in self.members[1:]:
            if m.head != head:
                raise ConfigError("ensemble members must share head kind and size")
            if m.input_dim != self.members[0].input_dim:
                raise ConfigError("ensemble members must share input dim")

    @classmethod
    def single(cls, net: Network) -> "Teacher":
        return cls(members=[net])

    @property
    def head(self) -> Head:
        return self.members[0].head

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim


@dataclass
class TeacherOutput:
    """Batch of teacher predictions with the caches distillation needs."""

    kind: str                        # "categorical" | "gaussian"
    probs: np.ndarray | None = None      # (n, c)
    logits: np.ndarray | None = None     # (n, c) log of averaged probs
    mu: np.ndarray | None = None         # (n, d)
    s: np.ndarray | None = None          # (n,)

    @property
    def n(self) -> int:
        arr = self.probs if self.kind == "categorical" else self.mu
        return arr.shape[0]

    def row(self, i):
        if self.kind == "categorical":
            return CategoricalDist(probs=self.probs[i], logits=self.logits[i])
        return GaussianPred(mu=self.mu[i], s=float(self.s[i]))


def teacher_predict(teacher: Teacher, batch, threads=None) -> TeacherOutput:
    """Average the committee members' outputs over a batch.

    Classification averages T=1 softmax probabilities and caches
    log(mean probs) as the logit surrogate (softmax of a log-prob vector
    reproduces the probs, so temperature rescaling stays exact).
    Regression averages mu and s arithmetically.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != teacher.input_dim:
        raise ShapeError("batch incompatible with teacher input dim")
    raws = [forward(m, batch, threads=threads) for m in teacher.members]
    if teacher.head.kind == "logits":
        probs = np.mean([softmax(r) for r in raws], axis=0)
        logits = np.log(np.maximum(probs, _TINY))
        return TeacherOutput(kind="categorical", probs=probs, logits=logits)
    mus = np.mean([r[:, :-1] for r in raws], axis=0)
    ss = np.mean([r[:, -1] for r in raws], axis=0)
    return TeacherOutput(kind="gaussian", mu=mus, s=ss)


@dataclass
class TransferSet:
    """Inputs plus cached teacher outputs and optional ground truth."""

    inputs: np.ndarray
    outputs: TeacherOutput
    truth_labels: np.ndarray | None = None
    truth_targets: np.ndarray | None = None
    num_classes: int | None = None
    provenance: str = ""

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise DataError("transfer set needs a nonempty input matrix")
        if self.outputs.n != self.n:
            raise DataError("teacher output rows differ from inputs")
        if self.truth_labels is not None and self.truth_labels.shape != (self.n,):
            raise DataError("truth labels must be a length-n vector")
        if self.truth_targets is not None and self.truth_targets.shape[0] != self.n:
            raise DataError("truth targets row count differs from inputs")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def materialize_transfer_set(teacher: Teacher, sampler: TransferSampler, n,
                             rng: Rng, threads=None) -> TransferSet:
    """Draw n inputs from the sampler and label them with the teacher.

    Ground truth is carried over when the sampler yields verbatim dataset
    rows (empirical and noise-free variants expose their source indices).
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    gen = rng.substream("sampling")
    batch = sampler.sample(n, gen)
    if batch.inputs.shape[1] != teacher.input_dim:
        raise ShapeError(
            f"sampler dim {batch.inputs.shape[1]} != teacher input {teacher.input_dim}"
        )
    outputs = teacher_predict(teacher, batch.inputs, threads=threads)
    truth_labels = truth_targets = None
    num_classes = None
    if batch.source_indices is not None and isinstance(sampler, EmpiricalSampler):
        ds = sampler.dataset
        if ds.labels is not None:
            truth_labels = ds.labels[batch.source_indices]
            num_classes = ds.num_classes
        elif ds.targets is not None:
            truth_targets = ds.targets[batch.source_indices]
    return TransferSet(
        inputs=batch.inputs,
        outputs=outputs,
        truth_labels=truth_labels,
        truth_targets=truth_targets,
        num_classes=num_classes,
        provenance=f"{sampler.provenance()} seed={rng.seed} n={n}",
    )


# ---------------------------------------------------------------------------
# Transfer-set file format.
# Line 1: "xcl-transferset v1"
# Line 2: n, d, output kind and size, truth kind
# Line 3: "provenance=<free text>"
# Rows:   features, then c logits + c probs (categorical) or d mus + s
#         (gaussian), then the optional ground truth.
# ---------------------------------------------------------------------------

MAGIC_TRANSFER = "xcl-transferset v1"


def save_transfer_set(tset: TransferSet, path) -> None:
    out = tset.outputs
    head = f"n={tset.n} d={tset.inputs.shape[1]}"
    if out.kind == "categorical":
        head += f" output=categorical c={out.probs.shape[1]}"
    else:
        head += f" output=gaussian g={out.mu.shape[1]}"
    if tset.truth_labels is not None:
        head += f" truth=class tc={tset.num_classes}"
    elif tset.truth_targets is not None:
        head += f" truth=regression m={tset.truth_targets.shape[1]}"
    else:
        head += " truth=none"
    lines = [MAGIC_TRANSFER, head, f"provenance={tset.provenance}"]
    for i in range(tset.n):
        cells = [_fmt(v) for v in tset.inputs[i]]
        if out.kind == "categorical":
            cells.extend(_fmt(v) for v in out.logits[i])
            cells.extend(_fmt(v) for v in out.probs[i])
        else:
            cells.extend(_fmt(v) for v in out.mu[i])
            cells.append(_fmt(out.s[i]))
        if tset.truth_labels is not None:
            cells.append(str(int(tset.truth_labels[i])))
        elif tset.truth_targets is not None:
            cells.extend(_fmt(v) for v in tset.truth_targets[i])
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_transfer_set(path) -> TransferSet:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC_TRANSFER:
        raise ParseError(f"expected header {MAGIC_TRANSFER!r}", line=1)
    if len(lines) < 3:
        raise ParseError("missing header lines", line=min(len(lines) + 1, 3))
    fields = _parse_header_fields(lines[1], 2)
    try:
        n = int(fields["n"])
        d = int(fields["d"])
        kind = fields["output"]
        truth = fields["truth"]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header: {exc}", line=2)
    if not lines[2].startswith("provenance="):
        raise ParseError("expected provenance line", line=3)
    provenance = lines[2][len("provenance="):]

    c = int(fields["c"]) if kind == "categorical" else 0
    g = int(fields["g"]) if kind == "gaussian" else 0
    out_cells = 2 * c if kind == "categorical" else g + 1
    truth_cells = 1 if truth == "class" else (int(fields.get("m", 0)) if truth == "regression" else 0)
    expected = d + out_cells + truth_cells

    inputs = np.empty((n, d))
    logits = np.empty((n, c)) if kind == "categorical" else None
    probs = np.empty((n, c)) if kind == "categorical" else None
    mu = np.empty((n, g)) if kind == "gaussian" else None
    s = np.empty(n) if kind == "gaussian" else None
    labels = np.empty(n, dtype=np.int64) if truth == "class" else None
    targets = np.empty((n, truth_cells)) if truth == "regression" else None
    for i in range(n):
        lineno = 4 + i
        if lineno - 1 >= len(lines):
            raise ParseError("file truncated", line=lineno)
        cells = lines[lineno - 1].split(",")
        if len(cells) != expected:
            raise ParseError(f"expected {expected} values, found {len(cells)}", line=lineno)
        try:
            vals = [float(x) for x in cells[:d + out_cells]]
            inputs[i] = vals[:d]
            if kind == "categorical":
                logits[i] = vals[d:d + c]
                probs[i] = vals[d + c:d + 2 * c]
            else:
                mu[i] = vals[d:d + g]
                s[i] = vals[d + g]
            if truth == "class":
                labels[i] = int(cells[-1])
            elif truth == "regression":
                targets[i] = [float(x) for x in cells[d + out_cells:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno)
    outputs = (
        TeacherOutput(kind="categorical", probs=probs, logits=logits)
        if kind == "categorical"
        else TeacherOutput(kind="gaussian", mu=mu, s=s)
    )
    return TransferSet(
        inputs=inputs,
        outputs=outputs,
        truth_labels=labels,
        truth_targets=targets,
        num_classes=int(fields["tc"]) if truth == "class" else None,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Teacher model file: member count, then per member a network header followed
# by each layer's weight rows and bias line.
# ---------------------------------------------------------------------------

MAGIC_TEACHER = "xcl-teacher v1"


def save_teacher(teacher: Teacher, path) -> None:
    lines = [MAGIC_TEACHER, f"members={len(teacher.members)}"]
    for net in teacher.members:
        dims = ",".join(str(d) for d in net.layer_dims)
        lines.append(
            f"network dims={dims} activation={net.activation} "
            f"head={net.head.kind} size={net.head.size}"
        )
        for w, b in zip(net.weights, net.biases):
            for row in w:
                lines.append(",".join(_fmt(v) for v in row))
            lines.append(",".join(_fmt(v) for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_teacher(path) -> Teacher:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC_TEACHER:
        raise ParseError(f"expected header {MAGIC_TEACHER!r}", line=1)
    if len(lines) < 2 or not lines[1].startswith("members="):
        raise ParseError("expected members count", line=2)
    count = int(lines[1].split("=", 1)[1])
    pos = 2
    members = []
    for _ in range(count):
        if pos >= len(lines) or not lines[pos].startswith("network "):
            raise ParseError("expected network header", line=pos + 1)
        fields = _parse_header_fields(lines[pos][len("network "):], pos + 1)
        dims = tuple(int(x) for x in fields["dims"].split(","))
        head = Head(fields["head"], int(fields["size"]))
        pos += 1
        weights, biases = [], []
        for l in range(len(dims) - 1):
            out_dim, in_dim = dims[l + 1], dims[l]
            w = np.empty((out_dim, in_dim))
            for r in range(out_dim):
                if pos >= len(lines):
                    raise ParseError("file truncated", line=pos + 1)
                cells = lines[pos].split(",")
                if len(cells) != in_dim:
                    raise ParseError(f"expected {in_dim} weights, found {len(cells)}", line=pos + 1)
                w[r] = [float(x) for x in cells]
                pos += 1
            if pos >= len(lines):
                raise ParseError("file truncated", line=pos + 1)
            cells = lines[pos].split(",")
            if len(cells) != out_dim:
                raise ParseError(f"expected {out_dim} biases, found {len(cells)}", line=pos + 1)
            b = np.array([float(x) for x in cells])
            pos += 1
            weights.append(w)
            biases.append(b)
        members.append(
            Network(
                layer_dims=dims,
                weights=weights,
                biases=biases,
                activation=fields["activation"],
                head=head,
            )
        )
    return Teacher(members=members)
