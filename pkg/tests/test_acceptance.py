"""Acceptance suite: one test per criterion, frozen configs, stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion. Every experiment here is deterministic (fixed seeds), so
reruns reproduce these numbers bit for bit.

Criterion 8 is expected to fail; see the assertion message and the project
notes. The gaussian-image bound is kept exactly as stated rather than
loosened to whatever the implementation achieves.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from xcl import experiments
from xcl.analysis import evaluate, uncertainty_vs_lambda
from xcl.cli import main as cli_main
from xcl.config import default_config
from xcl.losses import LossKind, LossSpec, normalized_entropy, softmax
from xcl.nn_core import TrainingData, gaussian_head, init_network, logits_head
from xcl.rng import Rng
from xcl.samplers import MixSampler
from xcl.teacher import teacher_predict

from test_nn_core import end_to_end_grads, fd_param_grads, max_rel_error

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
REPO_DIR = os.path.dirname(TESTS_DIR)


def report(criterion, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status} - {detail}", flush=True)
    return ok


# Frozen experiment configurations (tuned once; see configs/ for the CLI
# equivalents). Observation studies: calibrated teacher on half the pool.
OBS_CONFIG = dict(
    dataset__spread=1.8,
    dataset__teacher_fraction=0.5,
    teacher__weight_decay=1e-2,
    student__hidden=(8,),
    student__lr=0.05,
    student__batch_size=16,
    student__epochs=400,
    student__schedule=((250, 0.2), (350, 0.2)),
    seeds=tuple(range(7)),
)

# Main distillation comparison: teacher keeps 85% of the pool, students
# distill the held-out 15% either verbatim (kd) or as 1500 mixed samples.
XCL_CONFIG = dict(OBS_CONFIG, dataset__teacher_fraction=0.85, transfer__n=1500)

REG_CONFIG = dict(
    dataset__kind="hetero",
    dataset__n=1600,
    dataset__input_dim=6,
    dataset__noise_fn="sinusoidal",
    dataset__teacher_fraction=0.75,
    teacher__activation="tanh",
    teacher__hidden=(48, 48),
    teacher__lr=0.05,
    teacher__epochs=800,
    teacher__weight_decay=1e-3,
    teacher__batch_size=32,
    teacher__schedule=((560, 0.2), (720, 0.2)),
    student__activation="tanh",
    student__hidden=(12,),
    student__lr=0.02,
    student__epochs=500,
    student__batch_size=32,
    student__schedule=((350, 0.2), (450, 0.2)),
    seeds=tuple(range(7)),
)

# Sampler-degradation study: blobs pushed away from the N(0, 1) ball.
DEGRADATION_CONFIG = dict(
    dataset__spread=4.4,
    dataset__center_scale=6.0,
    dataset__teacher_fraction=1.0,
    teacher__weight_decay=1e-2,
    student__hidden=(8,),
    student__lr=0.005,
    student__batch_size=16,
    student__epochs=150,
    student__schedule=((90, 0.2),),
    transfer__n=1500,
)


def _grad_case(kind, temperature, seed):
    gen = np.random.default_rng(seed)
    n, c, d, din = 5, 4, 2, 3
    if kind in (LossKind.CROSS_ENTROPY_SOFT, LossKind.KD_CATEGORICAL):
        head = logits_head(c)
        data = TrainingData(
            inputs=gen.normal(size=(n, din)),
            target_probs=softmax(gen.normal(size=(n, c))),
            teacher_probs=softmax(gen.normal(size=(n, c)) * 2),
            num_classes=c,
        )
        spec = LossSpec(kind=kind, temperature=temperature,
                        target="ground-truth" if kind == LossKind.CROSS_ENTROPY_SOFT
                        else "teacher")
    else:
        head = gaussian_head(d)
        data = TrainingData(
            inputs=gen.normal(size=(n, din)),
            targets=gen.normal(size=(n, d)),
            teacher_mu=gen.normal(size=(n, d)),
            teacher_s=gen.normal(size=n) * 0.5,
        )
        spec = LossSpec(kind=kind, target="ground-truth"
                        if kind == LossKind.GAUSSIAN_NLL else "teacher")
    # Tanh keeps the loss surface smooth so central differences at h = 1e-5
    # measure the true derivative everywhere (no ReLU kinks).
    net = init_network([din, 6, 5, head.size], "tanh", head, Rng(1000 + seed))
    return net, spec, data


def test_criterion_1_gradient_oracle():
    """Analytic end-to-end gradients match central finite differences."""
    t0 = time.time()
    cases = [
        (LossKind.CROSS_ENTROPY_SOFT, 1.0),
        (LossKind.KD_CATEGORICAL, 1.0),
        (LossKind.KD_CATEGORICAL, 2.0),
        (LossKind.KD_CATEGORICAL, 5.0),
        (LossKind.GAUSSIAN_NLL, 1.0),
        (LossKind.GAUSSIAN_KL, 1.0),
    ]
    worst = 0.0
    for kind, temperature in cases:
        for seed in range(20):
            net, spec, data = _grad_case(kind, temperature, seed)
            analytic = end_to_end_grads(net, spec, data)
            flat = []
            for gw, gb in zip(analytic.weights, analytic.biases):
                flat.extend((gw, gb))
            numeric = fd_param_grads(net, spec, data, h=1e-5)
            worst = max(worst, max_rel_error(flat, numeric))
    elapsed = time.time() - t0
    ok = worst < 1e-4 and elapsed < 10.0
    assert report(1, ok, f"max rel err {worst:.2e} (<1e-4), {elapsed:.1f}s (<10s)")


def test_criterion_2_closed_form_oracles():
    """The unit suites hold every spec example at its stated tolerance."""
    t0 = time.time()
    modules = [
        "test_losses.py", "test_nn_core.py", "test_samplers.py",
        "test_datasets.py", "test_teacher.py", "test_analysis.py",
    ]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         *(os.path.join(TESTS_DIR, m) for m in modules)],
        cwd=REPO_DIR, capture_output=True, text=True,
    )
    elapsed = time.time() - t0
    ok = proc.returncode == 0 and elapsed < 30.0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else "?"
    assert report(2, ok, f"unit suites: {tail}, {elapsed:.1f}s (<30s)"), proc.stdout


def _collect(rows, method, metric="top1"):
    return np.array([r.value for r in rows if r.method == method and r.metric == metric])


def test_criterion_3_entropy_split_observation():
    """Distilling the high-entropy half beats the low-entropy half."""
    t0 = time.time()
    cfg = default_config().with_overrides(**OBS_CONFIG)
    rows = experiments.run_observation1(cfg)
    kd_h = _collect(rows, "kd-h")
    kd_l = _collect(rows, "kd-l")
    wins = int((kd_h > kd_l).sum())
    elapsed = time.time() - t0
    ok = (np.median(kd_h) > np.median(kd_l)) and wins >= 5 and elapsed < 180
    assert report(
        3, ok,
        f"median kd-on-H {np.median(kd_h):.3f} > kd-on-L {np.median(kd_l):.3f}, "
        f"wins {wins}/7 (>=5), {elapsed:.0f}s (<180s)",
    )


def test_criterion_4_zero_accuracy_observation():
    """Soft labels on teacher-mistake samples carry usable information."""
    t0 = time.time()
    cfg = default_config().with_overrides(**OBS_CONFIG)
    rows = experiments.run_observation2(cfg)
    kd_z = _collect(rows, "kd-z")
    erm_z = _collect(rows, "erm-z")
    chance = 1.0 / cfg["dataset.classes"]
    ratio = np.median(kd_z) / np.median(erm_z)
    elapsed = time.time() - t0
    ok = (ratio >= 2.0) and bool((kd_z > 5 * chance).all()) and elapsed < 180
    assert report(
        4, ok,
        f"median kd-on-Z {np.median(kd_z):.3f} vs erm-on-Z {np.median(erm_z):.3f} "
        f"(ratio {ratio:.2f} >= 2), min kd-on-Z {kd_z.min():.3f} > {5 * chance}, "
        f"{elapsed:.0f}s (<180s)",
    )


def test_criterion_5_regression_error_ordering():
    """ERM > plain prediction matching > Gaussian-KL distillation, as errors."""
    t0 = time.time()
    cfg = default_config().with_overrides(**REG_CONFIG)
    erm, kd, kdu = [], [], []
    for seed in cfg["seeds"]:
        errs = experiments.regression_methods(cfg, seed)
        erm.append(errs["erm"])
        kd.append(errs["kd"])
        kdu.append(errs["kd-uncertainty"])
    erm, kd, kdu = np.array(erm), np.array(kd), np.array(kdu)
    wins_erm_kd = int((erm > kd).sum())
    wins_kd_kdu = int((kd > kdu).sum())
    elapsed = time.time() - t0
    ok = wins_erm_kd >= 5 and wins_kd_kdu >= 5 and elapsed < 120
    assert report(
        5, ok,
        f"median errors erm {np.median(erm):.4f} > kd {np.median(kd):.4f} > "
        f"kd-uncertainty {np.median(kdu):.4f}; erm>kd {wins_erm_kd}/7, "
        f"kd>kdU {wins_kd_kdu}/7 (each >=5), {elapsed:.0f}s (<120s)",
    )


def test_criterion_6_xcl_beats_standard_kd():
    """Mixed transfer-set distillation beats empirical-set distillation."""
    t0 = time.time()
    cfg = default_config().with_overrides(**XCL_CONFIG)
    kd, xcl = [], []
    for seed in cfg["seeds"]:
        dataset = experiments.build_dataset(cfg, seed)
        a_set, b_set, eval_set = experiments.base_splits(cfg, dataset, seed)
        teacher = experiments.train_teacher_model(cfg, a_set, seed)
        kd_cfg = cfg.with_overrides(transfer__n=0)
        student, _ = experiments.train_student("kd", teacher, b_set, kd_cfg,
                                               Rng(seed).child("student-kd"))
        kd.append(evaluate(student, eval_set, k=5).top1)
        student, _ = experiments.train_student("xcl-mix", teacher, b_set, cfg,
                                               Rng(seed).child("student-xcl-mix"))
        xcl.append(evaluate(student, eval_set, k=5).top1)
    kd, xcl = np.array(kd), np.array(xcl)
    wins = int((xcl > kd).sum())
    elapsed = time.time() - t0
    ok = (np.median(xcl) > np.median(kd)) and wins >= 5 and elapsed < 180
    assert report(
        6, ok,
        f"median xcl-mix {np.median(xcl):.3f} > kd {np.median(kd):.3f}, "
        f"wins {wins}/7 (>=5), {elapsed:.0f}s (<180s)",
    )


def test_criterion_7_mixing_raises_teacher_entropy():
    """Teacher entropy over mixed inputs exceeds entropy over its train set."""
    cfg = default_config().with_overrides(**XCL_CONFIG)
    hits = 0
    for seed in range(5):
        dataset = experiments.build_dataset(cfg, seed)
        a_set, _, _ = experiments.base_splits(cfg, dataset, seed)
        teacher = experiments.train_teacher_model(cfg, a_set, seed)
        emp = teacher_predict(teacher, a_set.features).probs
        mixed = MixSampler(dataset=a_set).sample(
            a_set.n, Rng(seed).substream("entropy-mix"))
        mix = teacher_predict(teacher, mixed.inputs).probs
        if np.mean(normalized_entropy(mix)) > np.mean(normalized_entropy(emp)):
            hits += 1
    ok = hits == 5
    assert report(7, ok, f"mix entropy > empirical entropy in {hits}/5 seeds (need 5/5)")


def test_criterion_8_gaussian_image_degradation():
    """White-noise transfer-sets must destroy distillation; mixing must not.

    The mix half of this criterion holds. The gaussian-image half is
    genuinely unattainable with the pinned blob generator and dense MLP
    teachers: an MLP's class structure is quasi-linear, so its restriction
    to the N(0, 1) ball identifies the global classifier and the student
    recovers far more than 2x chance (measured 5-8x across every teacher
    scale, depth, activation, regularization, and ensemble size tried).
    The bound is asserted as specified rather than weakened; see the
    decisions ledger for the full analysis.
    """
    cfg = default_config().with_overrides(**DEGRADATION_CONFIG)
    chance = 1.0 / cfg["dataset.classes"]
    gauss, mix = [], []
    for seed in range(5):
        dataset = experiments.build_dataset(cfg, seed)
        a_set, _, eval_set = experiments.base_splits(cfg, dataset, seed)
        teacher = experiments.train_teacher_model(cfg, a_set, seed)
        student, _ = experiments.train_student(
            "xcl-gaussian-image", teacher, a_set, cfg,
            Rng(seed).child("student-xcl-gaussian-image"))
        gauss.append(evaluate(student, eval_set, k=5).top1)
        student, _ = experiments.train_student(
            "xcl-mix", teacher, a_set, cfg, Rng(seed).child("student-xcl-mix"))
        mix.append(evaluate(student, eval_set, k=5).top1)
    gauss, mix = np.array(gauss), np.array(mix)
    gauss_ok = bool((gauss < 2 * chance).all())
    mix_ok = bool((mix > 5 * chance).all())
    ok = gauss_ok and mix_ok
    report(
        8, ok,
        f"gaussian-image max {gauss.max():.3f} (< {2 * chance} required: "
        f"{gauss_ok}), mix min {mix.min():.3f} (> {5 * chance}: {mix_ok})",
    )
    assert mix_ok, "mix side of the criterion must hold"
    assert gauss_ok, (
        "gaussian-image student stays far above 2x chance; unattainable for "
        "quasi-linear MLP teachers on single-center blobs (see decisions ledger)"
    )


def test_criterion_9_uncertainty_peaks_at_half_mix():
    """Teacher's predicted sigma is maximal for half-mixed input pairs."""
    cfg = default_config().with_overrides(**REG_CONFIG)
    hits = 0
    for seed in range(5):
        dataset = experiments.build_dataset(cfg, seed)
        a_set, _, eval_set = experiments.base_splits(cfg, dataset, seed)
        teacher = experiments.train_teacher_model(cfg, a_set, seed)
        curve = dict(uncertainty_vs_lambda(
            teacher, eval_set, [0.0, 0.5, 1.0], cfg["curve.pairs"],
            Rng(seed).child("curve-teacher")))
        if curve[0.5] > curve[0.0] and curve[0.5] > curve[1.0]:
            hits += 1
    ok = hits >= 4
    assert report(9, ok, f"sigma(0.5) exceeds both endpoints in {hits}/5 seeds (>=4)")


def test_criterion_10_byte_identical_reruns(tmp_path):
    """Re-running any experiment with the same config+seed rewrites the same bytes."""
    cfg_text = (
        "seeds=0\n"
        "dataset.classes=3\ndataset.dim=4\ndataset.per_class=20\n"
        "dataset.spread=1.0\ndataset.teacher_fraction=0.5\n"
        "teacher.hidden=12\nteacher.epochs=15\n"
        "student.hidden=6\nstudent.epochs=15\nstudent.schedule=\n"
        "eval.topk=2\nfigures=false\n"
    )
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(cfg_text)
    out = str(tmp_path / "results")
    digests = []
    for _ in range(2):
        code = cli_main(["observation1", "--config", str(cfg_path), "--out", out])
        assert code == 0
        digests.append(open(os.path.join(out, "observation1.csv"), "rb").read())
    ok = digests[0] == digests[1]
    assert report(10, ok, f"rerun CSV identical: {ok} ({len(digests[0])} bytes)")
