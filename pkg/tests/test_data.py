import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kis.data import (Dataset, FeatureWindowing, _plugin_mi, balance_and_split, build_windows,
                      explicit_windows, load_csv, load_features_csv, load_libsvm,
                      mutual_information_scores, zscore_fit_transform)
from kis.errors import DataError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLibsvm:
    def test_dense_fill_and_labels(self, tmp_path):
        data = load_libsvm(write(tmp_path, "a.svm", "+1 1:0.5 3:2.0\n0 2:1.0\n"))
        assert data.d == 3
        np.testing.assert_array_equal(data.points, [[0.5, 0, 2.0], [0, 1.0, 0]])
        np.testing.assert_array_equal(data.labels, [1, -1])

    def test_single_line_zero_label(self, tmp_path):
        data = load_libsvm(write(tmp_path, "a.svm", "0 2:1.0\n"))
        np.testing.assert_array_equal(data.points, [[0, 1.0]])
        assert data.labels[0] == -1

    def test_dimension_from_largest_index(self, tmp_path):
        lines = [f"{(-1) ** k} {k + 1}:1.5" for k in range(8)]
        assert load_libsvm(write(tmp_path, "a.svm", "\n".join(lines) + "\n")).d == 8

    def test_comments_and_blank_lines(self, tmp_path):
        data = load_libsvm(write(tmp_path, "a.svm", "# header\n\n-1 1:2 # trailing\n"))
        assert data.n == 1 and data.points[0, 0] == 2

    @pytest.mark.parametrize("text, fragment", [
        ("1 1:0.5\n1 2:x\n", ":2"),
        ("1 3:1 2:1\n", "increasing"),
        ("2 1:1\n", "label"),
        ("1 0:1\n", "1-based"),
        ("1 1-1\n", "malformed"),
    ])
    def test_malformed_lines_report_location(self, tmp_path, text, fragment):
        with pytest.raises(DataError, match=fragment):
            load_libsvm(write(tmp_path, "a.svm", text))

    def test_empty_and_missing(self, tmp_path):
        with pytest.raises(DataError, match="no data"):
            load_libsvm(write(tmp_path, "e.svm", "\n# nothing\n"))
        with pytest.raises(DataError, match="no such file"):
            load_libsvm(tmp_path / "missing.svm")


class TestCsv:
    def test_shape_and_label_mapping(self, tmp_path):
        data = load_csv(write(tmp_path, "a.csv", "x,y,label\n1,2,0\n3,4,1\n5,6,1\n"), "label")
        assert (data.n, data.d) == (3, 2)
        np.testing.assert_array_equal(data.labels, [-1, 1, 1])
        assert data.feature_names == ["x", "y"]

    def test_headerless_index(self, tmp_path):
        data = load_csv(write(tmp_path, "a.csv", "1,1,2\n-1,3,4\n"), 0)
        np.testing.assert_array_equal(data.points, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(data.labels, [1, -1])

    def test_missing_cell_reports_coordinates(self, tmp_path):
        with pytest.raises(DataError, match=r"row 3, column 2"):
            load_csv(write(tmp_path, "a.csv", "a,b,l\n1,2,1\n3,,0\n"))

    def test_ragged_and_non_numeric(self, tmp_path):
        with pytest.raises(DataError, match="columns"):
            load_csv(write(tmp_path, "a.csv", "1,2,1\n3,0\n"))
        with pytest.raises(DataError, match="non-numeric"):
            load_csv(write(tmp_path, "b.csv", "1,2,1\n3,abc,0\n"))

    def test_bad_label(self, tmp_path):
        with pytest.raises(DataError, match="label"):
            load_csv(write(tmp_path, "a.csv", "1,2,3\n"))

    def test_unlabeled(self, tmp_path):
        X = load_features_csv(write(tmp_path, "u.csv", "1,2\n3,4\n"))
        np.testing.assert_array_equal(X, [[1, 2], [3, 4]])


def imbalanced(n_pos, n_neg, d=3, seed=0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.ones(n_pos), -np.ones(n_neg)]
    return Dataset(rng.standard_normal((n_pos + n_neg, d)), y)


class TestSplit:
    def test_balanced_training_split(self):
        train, test = balance_and_split(imbalanced(100, 300), 0.5, seed=1)
        assert np.sum(train.labels > 0) == np.sum(train.labels < 0) == 50
        assert np.sum(test.labels > 0) == 50 and np.sum(test.labels < 0) == 150

    def test_deterministic(self):
        data = imbalanced(100, 300)
        a = balance_and_split(data, 0.5, seed=7)
        b = balance_and_split(data, 0.5, seed=7)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u.points, v.points)
            np.testing.assert_array_equal(u.labels, v.labels)

    def test_partition_on_balanced_data(self):
        train, test = balance_and_split(imbalanced(500, 500), 0.5, seed=3)
        assert train.n + test.n == 1000
        rows = {tuple(r) for r in train.points} | {tuple(r) for r in test.points}
        assert len(rows) == 1000

    def test_errors(self):
        with pytest.raises(DataError, match="absent"):
            balance_and_split(imbalanced(10, 0), 0.5)
        with pytest.raises(DataError):
            balance_and_split(imbalanced(10, 10), 1.0)
        with pytest.raises(DataError, match="fewer than 2"):
            balance_and_split(imbalanced(1, 10), 0.4)


class TestZscore:
    def test_two_point_column(self):
        train = Dataset([[0.0], [2.0]], [1, -1])
        test = Dataset([[3.0]], [1])
        tr, te = zscore_fit_transform(train, test)
        np.testing.assert_allclose(tr.points.ravel(), [-1, 1])
        assert te.points[0, 0] == pytest.approx(2.0)
        assert te.normalization is tr.normalization

    def test_constant_column_becomes_zero(self):
        tr, _ = zscore_fit_transform(Dataset([[4.0, 1.0], [4.0, 3.0]], [1, -1]))
        np.testing.assert_array_equal(tr.points[:, 0], 0.0)

    @given(st.integers(0, 2**31 - 1))
    def test_no_contamination(self, seed):
        rng = np.random.default_rng(seed)
        train = Dataset(rng.standard_normal((20, 3)), np.tile([1.0, -1.0], 10))
        a, _ = zscore_fit_transform(train, Dataset(rng.standard_normal((5, 3)), np.ones(5)))
        b, _ = zscore_fit_transform(train, Dataset(100 * rng.standard_normal((9, 3)), -np.ones(9)))
        np.testing.assert_array_equal(a.normalization.mean, b.normalization.mean)
        np.testing.assert_array_equal(a.normalization.std, b.normalization.std)


class TestMutualInformation:
    def test_label_copy_beats_noise(self):
        rng = np.random.default_rng(0)
        y = np.where(rng.random(2000) < 0.5, 1.0, -1.0)
        X = np.column_stack([y, rng.standard_normal(2000)])
        tr, _ = zscore_fit_transform(Dataset(X, y))
        mi = mutual_information_scores(tr)
        assert mi[0] > mi[1]
        assert mi[0] == pytest.approx(math.log(2), rel=0.01)

    def test_independent_feature_near_zero(self):
        rng = np.random.default_rng(1)
        n = 100_000
        data = Dataset(rng.standard_normal((n, 1)), np.where(rng.random(n) < 0.5, 1.0, -1.0))
        assert mutual_information_scores(data)[0] <= 0.01

    def test_matches_brute_force_table(self):
        rng = np.random.default_rng(2)
        y = np.where(rng.random(500) < 0.5, 1.0, -1.0)
        flip = rng.random(500) < 0.1
        x = np.where(flip, -y, y) + 0.3 * rng.standard_normal(500)
        data = Dataset(x[:, None], y)
        # oracle: explicit bin loop and textbook formula
        edges = np.linspace(-5, 5, 11)
        table = np.zeros((10, 2))
        for xi, yi in zip(np.clip(x, -5, 5), y):
            b = min(int(np.searchsorted(edges, xi, side="right")) - 1, 9)
            table[b, int(yi > 0)] += 1
        p = table / table.sum()
        oracle = sum(p[i, j] * math.log(p[i, j] / (p[i].sum() * p[:, j].sum()))
                     for i in range(10) for j in range(2) if p[i, j] > 0)
        assert mutual_information_scores(data)[0] == pytest.approx(oracle, abs=1e-12)
        assert _plugin_mi(table) == pytest.approx(oracle, abs=1e-12)

    def test_shift_invariance_of_rank(self):
        rng = np.random.default_rng(3)
        y = np.where(rng.random(1000) < 0.5, 1.0, -1.0)
        X = np.column_stack([y + rng.standard_normal(1000), rng.standard_normal(1000), 0.5 * y + rng.standard_normal(1000)])
        shifted = X + np.array([10.0, -4.0, 7.0])
        r1 = np.argsort(-mutual_information_scores(zscore_fit_transform(Dataset(X, y))[0]))
        r2 = np.argsort(-mutual_information_scores(zscore_fit_transform(Dataset(shifted, y))[0]))
        np.testing.assert_array_equal(r1, r2)

    def test_too_few_samples(self):
        with pytest.raises(DataError, match="fewer bins"):
            mutual_information_scores(Dataset(np.zeros((4, 1)), [1, -1, 1, -1]))


class TestWindows:
    @pytest.mark.parametrize("d, sizes", [(8, [3, 3, 2]), (28, [3] * 9 + [1]), (3, [3])])
    def test_counts(self, d, sizes):
        w = build_windows(np.linspace(1, 0, d), d)
        assert [len(x) for x in w.windows] == sizes
        assert w.P == math.ceil(d / 3)
        np.testing.assert_allclose(w.weights, 1 / w.P)
        np.testing.assert_array_equal(w.length_scales, 1.0)

    def test_ranked_grouping(self):
        w = build_windows([0.1, 0.9, 0.5, 0.7, 0.2, 0.3], 6)
        assert w.windows == ((1, 2, 3), (0, 4, 5))

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.sampled_from([1, 2, 3]))
    def test_partition_property(self, scores, size):
        w = build_windows(scores, len(scores), size)
        used = [j for win in w.windows for j in win]
        assert len(used) == len(set(used))
        assert w.P <= math.ceil(len(scores) / 3)

    def test_explicit(self):
        w = explicit_windows("1,2,3;5", 6)
        assert w.windows == ((0, 1, 2), (4,))
        with pytest.raises(DataError):
            explicit_windows("1,2;2,3", 6)
        with pytest.raises(DataError):
            explicit_windows("1,2,3,4", 6)
        with pytest.raises(DataError):
            explicit_windows("a", 6)

    def test_validation(self):
        with pytest.raises(DataError):
            FeatureWindowing(((0,), (1,), (2,)), [1, 1, 1], [1, 1, 1], n_features=6)
        with pytest.raises(DataError):
            FeatureWindowing(((0,),), [0.0], [1.0])
