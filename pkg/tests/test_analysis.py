"""Entropy splits, zero-accuracy subsets, metrics, and the uncertainty curve."""

import numpy as np
import pytest

from xcl.analysis import (
    MetricsReport,
    error_metric,
    evaluate,
    split_by_entropy,
    uncertainty_vs_lambda,
    zero_accuracy_subset,
)
from xcl.datasets import Dataset, make_blobs, make_heteroscedastic_regression
from xcl.errors import ConfigError, DataError
from xcl.losses import normalized_entropy, softmax
from xcl.nn_core import gaussian_head, init_network, logits_head
from xcl.rng import Rng
from xcl.teacher import Teacher, teacher_predict


def identity_net(c):
    """Logits equal inputs: lets tests choose teacher outputs exactly."""
    net = init_network([c, c], "relu", logits_head(c), Rng(0))
    net.weights[0][:] = np.eye(c)
    net.biases[0][:] = 0.0
    return net


def constant_class_net(c, cls):
    net = init_network([c, c], "relu", logits_head(c), Rng(0))
    net.weights[0][:] = 0.0
    net.biases[0][:] = -30.0
    net.biases[0][cls] = 30.0
    return net


def constant_sigma_net(d_in, d_out, s_value):
    """Gaussian head emitting mu = 0 and a fixed log-variance."""
    net = init_network([d_in, d_out], "tanh", gaussian_head(d_out), Rng(0))
    net.weights[0][:] = 0.0
    net.biases[0][:] = 0.0
    net.biases[0][-1] = s_value
    return net


def binary_logits_for_entropy(target_h):
    """Invert normalized entropy for c = 2 by bisection (independent oracle)."""
    lo, hi = 0.5, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h = normalized_entropy(np.array([mid, 1.0 - mid]))
        if h > target_h:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    return np.log(np.array([p, 1.0 - p]))


class TestSplitByEntropy:
    def test_tie_break_by_index(self):
        net = constant_class_net(3, 0)
        ds = make_blobs(3, 3, 3, 0.5, 1.0, Rng(1))
        result = split_by_entropy(Teacher.single(net), ds)
        n_high = int(np.ceil(ds.n / 2))
        assert result.high_set.tolist() == list(range(n_high))
        assert result.low_set.tolist() == list(range(n_high, ds.n))

    def test_prescribed_entropies_sorted(self):
        targets = [0.9, 0.1, 0.8, 0.2]
        feats = np.vstack([binary_logits_for_entropy(h) for h in targets])
        ds = Dataset(features=feats, labels=np.zeros(4, dtype=int), num_classes=2)
        result = split_by_entropy(identity_net(2), ds)
        assert sorted(result.high_set.tolist()) == [0, 2]
        assert sorted(result.low_set.tolist()) == [1, 3]
        assert result.avg_entropy_high > result.avg_entropy_low

    def test_partition_and_order_stat(self):
        ds = make_blobs(4, 6, 10, 1.0, 1.0, Rng(2))
        net = init_network([6, 8, 4], "relu", logits_head(4), Rng(3))
        result = split_by_entropy(Teacher.single(net), ds)
        merged = sorted(result.high_set.tolist() + result.low_set.tolist())
        assert merged == list(range(ds.n))
        assert abs(len(result.high_set) - len(result.low_set)) <= 1
        assert result.avg_entropy_high >= result.avg_entropy_low

    def test_regression_teacher_rejected(self):
        ds = make_heteroscedastic_regression(10, 2, "linear", Rng(4))
        net = init_network([2, 4, 2], "tanh", gaussian_head(2), Rng(5))
        with pytest.raises(ConfigError):
            split_by_entropy(Teacher.single(net), ds)

    def test_permutation_covariance(self):
        ds = make_blobs(3, 5, 8, 1.0, 1.0, Rng(6))
        net = init_network([5, 6, 3], "relu", logits_head(3), Rng(7))
        base = split_by_entropy(net, ds)
        perm = Rng(8).substream("perm").permutation(ds.n)
        shuffled = ds.subset(perm)
        moved = split_by_entropy(net, shuffled)
        # Map shuffled indices back to original identity.
        back = set(perm[moved.high_set].tolist())
        # Entropy ties across distinct rows are measure-zero here, so the
        # high sets must agree as sets of original rows.
        assert back == set(base.high_set.tolist())


class TestZeroAccuracySubset:
    def test_perfect_teacher_empty(self):
        ds = make_blobs(3, 3, 4, 0.0, 5.0, Rng(9))
        # Identity on one-hot-ish blob centers will not be perfect, so build
        # a teacher from the labels themselves.
        feats = np.eye(3)[ds.labels] * 10.0
        easy = Dataset(features=feats, labels=ds.labels, num_classes=3)
        assert zero_accuracy_subset(identity_net(3), easy).size == 0

    def test_constant_teacher_enumeration(self):
        ds = Dataset(features=np.zeros((3, 2)), labels=np.array([0, 1, 1]), num_classes=2)
        net = constant_class_net(2, 0)
        assert zero_accuracy_subset(net, ds).tolist() == [1, 2]

    def test_teacher_top1_on_z_is_zero(self):
        ds = make_blobs(4, 5, 20, 1.5, 1.0, Rng(10))
        net = init_network([5, 8, 4], "relu", logits_head(4), Rng(11))
        z = zero_accuracy_subset(net, ds)
        if z.size:
            report = evaluate(net, ds.subset(z), k=2)
            assert report.top1 == 0.0

    def test_requires_labels(self):
        ds = Dataset(features=np.zeros((3, 2)))
        with pytest.raises(DataError):
            zero_accuracy_subset(constant_class_net(2, 0), ds)


class TestEvaluate:
    def test_self_labeled_dataset_perfect(self):
        ds = make_blobs(3, 4, 10, 1.0, 1.0, Rng(12))
        net = init_network([4, 6, 3], "relu", logits_head(3), Rng(13))
        pred = np.argmax(teacher_predict(Teacher.single(net), ds.features).probs, axis=1)
        self_labeled = Dataset(features=ds.features, labels=pred, num_classes=3)
        report = evaluate(net, self_labeled, k=2)
        assert report.top1 == 1.0

    def test_uniform_model_chance_metrics(self):
        c = 10
        net = constant_class_net(c, 0)
        net.biases[0][:] = 0.0  # now truly uniform
        ds = make_blobs(c, c, 3, 0.5, 1.0, Rng(14))
        report = evaluate(net, ds, k=5)
        assert abs(report.avg_truth_prob - 0.1) < 1e-12
        assert abs(report.avg_entropy - 1.0) < 1e-12

    def test_counting_top1(self):
        ds = Dataset(features=np.zeros((3, 2)), labels=np.array([0, 0, 1]), num_classes=2)
        net = constant_class_net(2, 0)
        report = evaluate(net, ds, k=1)
        assert abs(report.top1 - 2.0 / 3.0) < 1e-12

    def test_topk_membership(self):
        feats = np.array([
            [3.0, 2.0, 1.0, 0.0],
            [0.0, 1.0, 2.0, 3.0],
        ])
        ds = Dataset(features=feats, labels=np.array([1, 0]), num_classes=4)
        net = identity_net(4)
        assert evaluate(net, ds, k=2).topk == 0.5
        assert evaluate(net, ds, k=4).topk == 1.0

    def test_k_larger_than_classes_rejected(self):
        ds = Dataset(features=np.zeros((2, 3)), labels=np.array([0, 1]), num_classes=3)
        with pytest.raises(ConfigError):
            evaluate(identity_net(3), ds, k=4)

    def test_row_permutation_invariance(self):
        ds = make_blobs(3, 4, 12, 1.0, 1.0, Rng(15))
        net = init_network([4, 5, 3], "relu", logits_head(3), Rng(16))
        base = evaluate(net, ds, k=2)
        perm = Rng(17).substream("perm").permutation(ds.n)
        moved = evaluate(net, ds.subset(perm), k=2)
        assert np.isclose(base.top1, moved.top1)
        assert np.isclose(base.avg_entropy, moved.avg_entropy, atol=1e-12)
        assert np.isclose(base.avg_truth_prob, moved.avg_truth_prob, atol=1e-12)

    def test_regression_mean_error(self):
        ds = make_heteroscedastic_regression(20, 2, "linear", Rng(18))
        net = constant_sigma_net(2, 2, 0.0)
        report = evaluate(net, ds, k=1)
        expected = np.mean(np.linalg.norm(ds.targets, axis=1))
        assert np.isclose(report.mean_error, expected)


class TestErrorMetric:
    def test_zero_for_equal(self):
        v = np.array([1.0, 2.0])
        assert error_metric(v, v, "euclidean") == 0.0
        # arccos near 1.0 has O(sqrt(eps)) sensitivity, hence the tolerance.
        assert error_metric(v, v, "angular") < 1e-5

    def test_right_angle(self):
        assert np.isclose(error_metric(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                                       "angular"), 90.0)

    def test_pythagorean(self):
        assert np.isclose(error_metric(np.array([3.0, 4.0]), np.zeros(2),
                                       "euclidean"), 5.0)

    def test_zero_vector_angular_rejected(self):
        with pytest.raises(DataError):
            error_metric(np.array([1.0, 0.0]), np.zeros(2), "angular")

    def test_clamping_handles_rounding(self):
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        assert error_metric(v, v * 3.0, "angular") == 0.0


class TestUncertaintyVsLambda:
    def test_constant_sigma_model_flat(self):
        ds = make_heteroscedastic_regression(30, 2, "linear", Rng(19))
        net = constant_sigma_net(2, 2, 0.8)
        curve = uncertainty_vs_lambda(net, ds, [0.0, 0.5, 1.0], 20, Rng(20))
        for _, sigma in curve:
            assert np.isclose(sigma, np.exp(0.4))

    def test_endpoints_evaluate_raw_rows(self):
        ds = make_heteroscedastic_regression(25, 2, "linear", Rng(21))
        net = init_network([2, 6, 2], "tanh", gaussian_head(2), Rng(22))
        curve = uncertainty_vs_lambda(net, ds, [0.0, 1.0], 500, Rng(23))
        out = teacher_predict(Teacher.single(net), ds.features)
        sig = np.exp(0.5 * out.s)
        # Raw rows only, so both endpoint values stay within the raw range.
        for _, val in curve:
            assert sig.min() - 1e-12 <= val <= sig.max() + 1e-12

    def test_classification_head_rejected(self):
        ds = make_blobs(3, 4, 5, 0.5, 1.0, Rng(24))
        with pytest.raises(ConfigError):
            uncertainty_vs_lambda(identity_net(4), ds, [0.0], 5, Rng(25))

    def test_grid_domain_checked(self):
        ds = make_heteroscedastic_regression(10, 2, "linear", Rng(26))
        net = constant_sigma_net(2, 2, 0.0)
        with pytest.raises(ConfigError):
            uncertainty_vs_lambda(net, ds, [0.0, 1.2], 5, Rng(27))

    def test_deterministic(self):
        ds = make_heteroscedastic_regression(15, 2, "linear", Rng(28))
        net = init_network([2, 4, 2], "tanh", gaussian_head(2), Rng(29))
        a = uncertainty_vs_lambda(net, ds, [0.0, 0.5, 1.0], 50, Rng(30))
        b = uncertainty_vs_lambda(net, ds, [0.0, 0.5, 1.0], 50, Rng(30))
        assert a == b


class TestAvgTruthProbInvariant:
    def test_in_unit_interval_and_tight_only_when_perfect(self):
        gen = np.random.default_rng(31)
        for trial in range(20):
            c = 4
            probs = softmax(gen.normal(size=(10, c)) * 2)
            labels = gen.integers(c, size=10)
            p = float(np.mean(probs[np.arange(10), labels]))
            assert 0.0 <= p <= 1.0
            if p > 1.0 - 1e-9:
                onehot = np.zeros_like(probs)
                onehot[np.arange(10), labels] = 1.0
                assert np.allclose(probs, onehot, atol=1e-6)
