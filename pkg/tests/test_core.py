import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interpnn.core import (
    LabeledDataset,
    RngSeed,
    Task,
    split_indices,
    split_train_test,
    validate_dataset,
)
from interpnn.errors import DegenerateSplitError, InvalidDatasetError


class TestValidateDataset:
    def test_well_formed(self):
        report = validate_dataset([[0, 0], [1, 0], [0, 1]], [0, 1, 1], Task.CLASSIFICATION)
        assert report.ok
        assert str(report) == "ok"

    def test_mixed_dimensions(self):
        report = validate_dataset([[0, 0], [1, 2, 3]], [0, 1], Task.REGRESSION)
        assert [(v.kind, v.index) for v in report.violations] == [("DimensionMismatch", 1)]

    def test_non_binary_label(self):
        report = validate_dataset([[0.0], [1.0]], [0.5, 1.0], Task.CLASSIFICATION)
        assert [(v.kind, v.index) for v in report.violations] == [("NonBinaryLabel", 0)]

    def test_non_binary_allowed_for_regression(self):
        assert validate_dataset([[0.0], [1.0]], [0.5, 7.0], Task.REGRESSION).ok

    def test_non_finite(self):
        report = validate_dataset([[0.0, np.nan], [1.0, 1.0]], [0.0, np.inf])
        assert report.kinds() == ["NonFiniteValue", "NonFiniteValue"]
        assert [v.index for v in report.violations] == [0, 1]

    def test_empty(self):
        assert validate_dataset([], []).kinds() == ["EmptyDataset"]

    def test_reports_every_violation(self):
        report = validate_dataset([[0, 0], [1], [2, 2], [3]], [0, 2, 1, 0.5], "classification")
        assert [(v.kind, v.index) for v in report.violations] == [
            ("DimensionMismatch", 1), ("DimensionMismatch", 3),
            ("NonBinaryLabel", 1), ("NonBinaryLabel", 3)]


class TestLabeledDataset:
    def test_construction_rejects_bad_labels(self):
        with pytest.raises(InvalidDatasetError) as err:
            LabeledDataset([[0.0], [1.0]], [0.0, 2.0], Task.CLASSIFICATION)
        assert err.value.report.kinds() == ["NonBinaryLabel"]

    def test_immutable(self):
        ds = LabeledDataset([[0.0, 1.0]], [1.0])
        with pytest.raises(ValueError):
            ds.points[0, 0] = 5.0
        assert ds.n == 1 and ds.d == 2

    def test_one_dimensional_points(self):
        ds = LabeledDataset([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        assert ds.points.shape == (3, 1)

    def test_content_hash_ignores_row_order(self, rng):
        x = rng.normal(size=(20, 3))
        y = rng.integers(0, 2, 20).astype(float)
        perm = rng.permutation(20)
        a = LabeledDataset(x, y, Task.CLASSIFICATION)
        b = LabeledDataset(x[perm], y[perm], Task.CLASSIFICATION)
        assert a.content_hash() == b.content_hash()
        assert np.array_equal(a.canonical().points, b.canonical().points)


class TestRngSeed:
    def test_same_seed_same_stream(self):
        a = RngSeed(7, 3).generator().random(5)
        b = RngSeed(7, 3).generator().random(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        assert not np.array_equal(RngSeed(7, 0).generator().random(5),
                                  RngSeed(7, 1).generator().random(5))
        assert not np.array_equal(RngSeed(7).child(0).generator().random(5),
                                  RngSeed(7).child(1).generator().random(5))

    def test_string_keys_are_stable(self):
        a = RngSeed(1).child("train", 4).generator().integers(0, 1 << 30, 3)
        b = RngSeed(1).child("train", 4).generator().integers(0, 1 << 30, 3)
        assert np.array_equal(a, b)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RngSeed(-1)
        with pytest.raises(ValueError):
            RngSeed(2**64)


class TestSplit:
    def test_quarter_split(self, seed):
        ds = LabeledDataset(np.arange(100.0)[:, None], np.zeros(100))
        train, test = split_train_test(ds, 0.25, seed)
        assert (train.n, test.n) == (25, 75)

    def test_deterministic(self):
        ds = LabeledDataset(np.arange(4.0)[:, None], np.arange(4.0))
        a = split_train_test(ds, 0.25, RngSeed(99))
        b = split_train_test(ds, 0.25, RngSeed(99))
        assert np.array_equal(a[0].points, b[0].points)
        assert np.array_equal(a[1].points, b[1].points)

    def test_degenerate(self, seed):
        ds = LabeledDataset([[0.0], [1.0]], [0.0, 1.0])
        with pytest.raises(DegenerateSplitError):
            split_train_test(ds, 0.001, seed)

    def test_half_rounds_toward_train(self, seed):
        train, test = split_indices(10, 0.25, seed)  # 2.5 -> 3
        assert (train.size, test.size) == (3, 7)

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(2, 300), frac=st.floats(0.01, 0.99), s=st.integers(0, 2**63))
    def test_partition(self, n, frac, s):
        try:
            train, test = split_indices(n, frac, RngSeed(s))
        except DegenerateSplitError:
            return
        assert train.size + test.size == n
        assert np.intersect1d(train, test).size == 0
        assert np.array_equal(np.union1d(train, test), np.arange(n))
