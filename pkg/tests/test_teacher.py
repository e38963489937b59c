"""Teacher ensembles, transfer-set materialization, and file round-trips."""

import numpy as np
import pytest

from xcl.datasets import make_blobs, make_heteroscedastic_regression
from xcl.errors import ConfigError, ParseError, ShapeError
from xcl.losses import softmax
from xcl.nn_core import forward, gaussian_head, init_network, logits_head
from xcl.rng import Rng
from xcl.samplers import EmpiricalSampler, MixSampler
from xcl.teacher import (
    Teacher,
    load_teacher,
    load_transfer_set,
    materialize_transfer_set,
    save_teacher,
    save_transfer_set,
    teacher_predict,
)


def class_net(seed, dims=(4, 6, 3)):
    return init_network(list(dims), "relu", logits_head(dims[-1]), Rng(seed))


def reg_net(seed, dims=(2, 5, 2)):
    return init_network(list(dims), "tanh", gaussian_head(dims[-1]), Rng(seed))


class TestTeacherPredict:
    def test_single_member_matches_network(self):
        net = class_net(0)
        x = np.random.default_rng(0).normal(size=(7, 4))
        out = teacher_predict(Teacher.single(net), x)
        assert np.allclose(out.probs, softmax(forward(net, x)))

    def test_two_identical_members_match_one(self):
        net = class_net(1)
        x = np.random.default_rng(1).normal(size=(5, 4))
        solo = teacher_predict(Teacher.single(net), x)
        duo = teacher_predict(Teacher(members=[net, net.copy()]), x)
        assert np.allclose(solo.probs, duo.probs)

    def test_opposite_onehots_average_to_half(self):
        # Two linear nets with huge biases pinning opposite classes.
        a = class_net(2, dims=(2, 2))
        b = class_net(3, dims=(2, 2))
        for net, cls in ((a, 0), (b, 1)):
            net.weights[0][:] = 0.0
            net.biases[0][:] = -50.0
            net.biases[0][cls] = 50.0
        out = teacher_predict(Teacher(members=[a, b]), np.zeros((3, 2)))
        assert np.allclose(out.probs, 0.5, atol=1e-9)

    def test_ensemble_preserves_simplex(self):
        members = [class_net(s) for s in range(4)]
        x = np.random.default_rng(2).normal(size=(11, 4))
        out = teacher_predict(Teacher(members=members), x)
        assert np.max(np.abs(out.probs.sum(axis=1) - 1.0)) < 1e-12
        assert out.probs.min() >= 0.0

    def test_member_order_invariance(self):
        members = [class_net(s) for s in range(3)]
        x = np.random.default_rng(3).normal(size=(6, 4))
        fwd = teacher_predict(Teacher(members=members), x)
        rev = teacher_predict(Teacher(members=members[::-1]), x)
        assert np.allclose(fwd.probs, rev.probs, atol=1e-12)

    def test_m_copies_equal_one(self):
        net = class_net(4)
        x = np.random.default_rng(4).normal(size=(5, 4))
        one = teacher_predict(Teacher.single(net), x)
        many = teacher_predict(Teacher(members=[net.copy() for _ in range(5)]), x)
        assert np.allclose(one.probs, many.probs, atol=1e-12)

    def test_regression_average(self):
        a, b = reg_net(5), reg_net(6)
        x = np.random.default_rng(5).normal(size=(4, 2))
        ra, rb = forward(a, x), forward(b, x)
        out = teacher_predict(Teacher(members=[a, b]), x)
        assert np.allclose(out.mu, (ra[:, :2] + rb[:, :2]) / 2)
        assert np.allclose(out.s, (ra[:, 2] + rb[:, 2]) / 2)

    def test_heterogeneous_members_rejected(self):
        with pytest.raises(ConfigError):
            Teacher(members=[class_net(7), reg_net(8)])
        with pytest.raises(ConfigError):
            Teacher(members=[class_net(9, dims=(4, 3)), class_net(10, dims=(4, 6, 4))])

    def test_empty_ensemble_rejected(self):
        with pytest.raises(ConfigError):
            Teacher(members=[])

    def test_logit_cache_reproduces_probs(self):
        members = [class_net(s) for s in range(2)]
        x = np.random.default_rng(6).normal(size=(5, 4))
        out = teacher_predict(Teacher(members=members), x)
        assert np.allclose(softmax(out.logits), out.probs, atol=1e-12)


class TestMaterialize:
    def test_single_row(self):
        ds = make_blobs(3, 4, 5, 0.5, 1.0, Rng(10))
        t = Teacher.single(class_net(11))
        tset = materialize_transfer_set(t, EmpiricalSampler(dataset=ds), 1, Rng(12))
        assert tset.n == 1

    def test_no_replacement_full_draw_is_permutation(self):
        ds = make_blobs(2, 4, 6, 0.5, 1.0, Rng(13))
        t = Teacher.single(class_net(14))
        sampler = EmpiricalSampler(dataset=ds, replace=False)
        tset = materialize_transfer_set(t, sampler, ds.n, Rng(15))
        rows = sorted(map(tuple, tset.inputs))
        assert rows == sorted(map(tuple, ds.features))
        assert tset.truth_labels is not None

    def test_dim_mismatch_rejected(self):
        ds = make_blobs(2, 3, 5, 0.5, 1.0, Rng(16))
        t = Teacher.single(class_net(17))  # expects dim 4
        with pytest.raises(ShapeError):
            materialize_transfer_set(t, EmpiricalSampler(dataset=ds), 4, Rng(18))

    def test_deterministic(self):
        ds = make_blobs(3, 4, 6, 0.5, 1.0, Rng(19))
        t = Teacher.single(class_net(20))
        a = materialize_transfer_set(t, MixSampler(dataset=ds), 9, Rng(21))
        b = materialize_transfer_set(t, MixSampler(dataset=ds), 9, Rng(21))
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.outputs.probs, b.outputs.probs)


class TestTransferSetFile:
    def test_categorical_roundtrip_bit_identical(self, tmp_path):
        ds = make_blobs(3, 4, 6, 0.6, 1.2, Rng(22))
        t = Teacher(members=[class_net(23), class_net(24)])
        tset = materialize_transfer_set(
            t, EmpiricalSampler(dataset=ds, replace=False), ds.n, Rng(25)
        )
        path = tmp_path / "t.tset"
        save_transfer_set(tset, path)
        back = load_transfer_set(path)
        assert np.array_equal(back.inputs, tset.inputs)
        assert np.array_equal(back.outputs.probs, tset.outputs.probs)
        assert np.array_equal(back.outputs.logits, tset.outputs.logits)
        assert np.array_equal(back.truth_labels, tset.truth_labels)
        assert back.provenance == tset.provenance

    def test_gaussian_roundtrip(self, tmp_path):
        ds = make_heteroscedastic_regression(8, 2, "linear", Rng(26))
        t = Teacher.single(reg_net(27))
        tset = materialize_transfer_set(
            t, EmpiricalSampler(dataset=ds, replace=False), ds.n, Rng(28)
        )
        path = tmp_path / "g.tset"
        save_transfer_set(tset, path)
        back = load_transfer_set(path)
        assert np.array_equal(back.inputs, tset.inputs)
        assert np.array_equal(back.outputs.mu, tset.outputs.mu)
        assert np.array_equal(back.outputs.s, tset.outputs.s)
        assert np.array_equal(back.truth_targets, tset.truth_targets)

    def test_truncated_file(self, tmp_path):
        ds = make_blobs(2, 3, 4, 0.5, 1.0, Rng(29))
        t = Teacher.single(class_net(30, dims=(3, 2)))
        tset = materialize_transfer_set(t, EmpiricalSampler(dataset=ds), 6, Rng(31))
        path = tmp_path / "trunc.tset"
        save_transfer_set(tset, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ParseError):
            load_transfer_set(path)


class TestTeacherFile:
    def test_roundtrip_bit_identical(self, tmp_path):
        t = Teacher(members=[class_net(32), class_net(33)])
        path = tmp_path / "teacher.model"
        save_teacher(t, path)
        back = load_teacher(path)
        assert len(back.members) == 2
        for a, b in zip(t.members, back.members):
            assert a.layer_dims == b.layer_dims
            assert a.activation == b.activation and a.head == b.head
            for wa, wb in zip(a.params(), b.params()):
                assert np.array_equal(wa, wb)

    def test_gaussian_roundtrip(self, tmp_path):
        t = Teacher.single(reg_net(34))
        path = tmp_path / "reg.model"
        save_teacher(t, path)
        back = load_teacher(path)
        x = np.random.default_rng(7).normal(size=(5, 2))
        assert np.array_equal(forward(t.members[0], x), forward(back.members[0], x))

    def test_save_is_byte_stable(self, tmp_path):
        t = Teacher.single(class_net(35))
        p1, p2 = tmp_path / "a.model", tmp_path / "b.model"
        save_teacher(t, p1)
        save_teacher(t, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.model"
        path.write_text("garbage\n")
        with pytest.raises(ParseError):
            load_teacher(path)
