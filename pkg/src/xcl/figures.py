"""Figure rendering for the report path.

Each subcommand's CSV gets a PNG next to it: bar charts for the observation
studies, line plots for sweeps and the uncertainty curve, loss-style bars
for distillation comparisons. Renders through the Agg backend so it works
headless; figures are presentation only and never feed back into results.
"""

from __future__ import annotations

import os
import re
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _by_method_metric(rows):
    grouped = defaultdict(list)
    for row in rows:
        grouped[(row.method, row.metric)].append(row.value)
    return grouped


def _median(values):
    return float(np.median(values))


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def render_observation1(rows, path) -> None:
    grouped = _by_method_metric(rows)
    methods = ["erm-h", "kd-h", "erm-l", "kd-l"]
    present = [m for m in methods if (m, "top1") in grouped]
    if not present:
        return
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    vals = [100 * _median(grouped[(m, "top1")]) for m in present]
    colors = ["#d62728" if m.startswith("erm") else "#1f77b4" for m in present]
    ax1.bar(range(len(present)), vals, color=colors)
    ax1.set_xticks(range(len(present)), present)
    ax1.set_ylabel("top-1 (%)")
    ax1.set_title("students by transfer half")
    ent = [("transfer-h", "H"), ("transfer-l", "L")]
    labels, evals = [], []
    for key, label in ent:
        if (key, "entropy") in grouped:
            labels.append(label)
            evals.append(100 * _median(grouped[(key, "entropy")]))
    ax2.bar(labels, evals, color="#2ca02c")
    ax2.set_ylabel("avg normalized entropy (%)")
    ax2.set_title("transfer-set entropy")
    _save(fig, path)


def render_observation2(rows, path) -> None:
    grouped = _by_method_metric(rows)
    if ("kd-z", "top1") not in grouped:
        return
    fig, ax = plt.subplots(figsize=(4.4, 3.2))
    names = ["teacher-on-z", "erm-z", "kd-z"]
    vals = [100 * _median(grouped[(m, "top1")]) for m in names if (m, "top1") in grouped]
    ax.bar([n for n in names if (n, "top1") in grouped], vals,
           color=["#7f7f7f", "#d62728", "#1f77b4"])
    ax.set_ylabel("top-1 (%)")
    ax.set_title("training on the zero-teacher-accuracy set")
    _save(fig, path)


_AXIS_RE = re.compile(r"^(?P<base>.+)@(?P<axis>[^=]+)=(?P<value>.+)$")


def render_sweep(rows, path) -> None:
    """Median metric versus the axis value, one line per base method."""
    series = defaultdict(dict)
    for row in rows:
        if row.metric not in ("top1", "mean_error"):
            continue
        match = _AXIS_RE.match(row.method)
        if not match:
            continue
        base = match.group("base")
        try:
            value = float(match.group("value"))
        except ValueError:
            continue  # categorical axis (e.g. sampler names): bars handle it
        series[base].setdefault(value, []).append(row.value)
    if not series:
        return
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for base in sorted(series):
        xs = sorted(series[base])
        ys = [100 * _median(series[base][x]) for x in xs]
        ax.plot(xs, ys, marker="o", label=base)
    ax.set_xlabel("axis value")
    ax.set_ylabel("median top-1 (%)")
    ax.legend(fontsize=8)
    _save(fig, path)


def _is_numeric_axis(rows):
    for row in rows:
        match = _AXIS_RE.match(row.method)
        if match:
            try:
                float(match.group("value"))
                return True
            except ValueError:
                return False
    return False


def render_sweep_bars(rows, path) -> None:
    """Categorical sweeps (imbalance, sampler) rendered as bars."""
    grouped = _by_method_metric(rows)
    names = sorted({m for (m, metric) in grouped if metric == "top1" and m != "teacher"})
    if not names:
        return
    fig, ax = plt.subplots(figsize=(max(4.5, 0.8 * len(names)), 3.4))
    vals = [100 * _median(grouped[(m, "top1")]) for m in names]
    ax.bar(range(len(names)), vals, color="#1f77b4")
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("median top-1 (%)")
    _save(fig, path)


def render_curve_uncertainty(rows, path) -> None:
    series = defaultdict(dict)
    for row in rows:
        if not row.metric.startswith("sigma@lambda="):
            continue
        lam = float(row.metric.split("=", 1)[1])
        series[row.method].setdefault(lam, []).append(row.value)
    if not series:
        return
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for method in sorted(series):
        xs = sorted(series[method])
        ys = [_median(series[method][x]) for x in xs]
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_xlabel("mixing coefficient")
    ax.set_ylabel("mean predicted sigma")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_method_bars(rows, path) -> None:
    """Generic method comparison for train-teacher / distill outputs."""
    grouped = _by_method_metric(rows)
    metric = "top1" if any(m == "top1" for _, m in grouped) else "mean_error"
    names = sorted({name for (name, met) in grouped if met == metric})
    if not names:
        return
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(names)), 3.2))
    scale = 100 if metric == "top1" else 1
    vals = [scale * _median(grouped[(m, metric)]) for m in names]
    ax.bar(names, vals, color="#1f77b4")
    ax.set_ylabel("median top-1 (%)" if metric == "top1" else "median error")
    _save(fig, path)


def render_for_command(command, rows, path) -> None:
    if command == "observation1":
        render_observation1(rows, path)
    elif command == "observation2":
        render_observation2(rows, path)
    elif command == "curve-uncertainty":
        render_curve_uncertainty(rows, path)
    elif command.startswith("sweep"):
        if _is_numeric_axis(rows):
            render_sweep(rows, path)
        else:
            render_sweep_bars(rows, path)
    else:
        render_method_bars(rows, path)
