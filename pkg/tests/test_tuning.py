import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kis.data import FeatureWindowing, balance_and_split, zscore_fit_transform
from kis.errors import ConfigError, DataError, SolverStalled
from kis.ipm import IpmConfig
from kis.pipeline import PrecondConfig
from kis.synthetic import concentric_circles, gaussian_blobs
from kis.tuning import SearchSpace, accuracy, random_search, trial_log_header, write_trial_log

WIN2 = FeatureWindowing(((0, 1),), [1.0], [1.0], n_features=2)
PRECOND = PrecondConfig(rank=30)


@pytest.fixture(scope="module")
def circles():
    train, test = balance_and_split(concentric_circles(240, seed=2), 0.5, seed=0)
    return zscore_fit_transform(train, test)


class TestAccuracy:
    def test_examples(self):
        y = np.array([1, -1, 1, -1, 1, -1, 1, -1, 1, -1.0])
        assert accuracy(y, y) == 1.0
        assert accuracy(-y, y) == 0.0
        assert accuracy(np.r_[y[:5], -y[5:]], y) == 0.5

    def test_empty_and_mismatch(self):
        with pytest.raises(DataError):
            accuracy([], [])
        with pytest.raises(DataError):
            accuracy([1.0], [1.0, -1.0])

    @given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=50),
           st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=50))
    def test_in_unit_interval_and_symmetric(self, a, b):
        n = min(len(a), len(b))
        p, y = np.array(a[:n]), np.array(b[:n])
        acc = accuracy(p, y)
        assert 0.0 <= acc <= 1.0
        assert acc == accuracy(y, p)
        assert accuracy(-p, y) == pytest.approx(1.0 - acc)


class TestSearchSpace:
    def test_defaults_match_bounds(self):
        s = SearchSpace()
        assert s.ell_range == (0.1, 10.0) and s.C_range == (0.1, 0.7) and s.trials == 25

    def test_deterministic_sampling(self):
        a, b = SearchSpace(trials=8, seed=5).sample(3), SearchSpace(trials=8, seed=5).sample(3)
        for (ea, ca), (eb, cb) in zip(a, b):
            np.testing.assert_array_equal(ea, eb)
            assert ca == cb

    def test_baseline_first_and_ranges(self):
        draws = SearchSpace(trials=200, seed=1).sample(2)
        np.testing.assert_array_equal(draws[0][0], [1.0, 1.0])
        assert draws[0][1] == 0.4
        ells = np.array([e for e, _ in draws[1:]])
        Cs = np.array([c for _, c in draws[1:]])
        assert np.all((ells >= 0.1) & (ells <= 10.0)) and np.all((Cs >= 0.1) & (Cs <= 0.7))
        # log-uniform: about half the draws fall below the geometric midpoint 1
        assert 0.35 < np.mean(ells < 1.0) < 0.65
        # windows drawn independently
        assert np.mean(ells[:, 0] != ells[:, 1]) == 1.0

    def test_shared_lengthscale(self):
        for ells, _ in SearchSpace(trials=5, seed=2, shared_lengthscale=True).sample(3):
            assert len(set(ells)) == 1

    @pytest.mark.parametrize("kw", [dict(ell_range=(2.0, 1.0)), dict(C_range=(0.0, 0.5)), dict(trials=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SearchSpace(**kw)


class TestRandomSearch:
    def test_single_trial_returns_its_params(self, circles):
        train, test = circles
        space = SearchSpace(trials=1, seed=3, include_baseline=False)
        (ells, C), = space.sample(1)
        res = random_search(train, test, WIN2, space, precond=PRECOND, operator="exact")
        assert res.best_C == C
        np.testing.assert_array_equal(res.best_spec.windowing.length_scales, ells)
        assert len(res.log) == 1

    def test_best_dominates_baseline(self):
        train, test = zscore_fit_transform(*balance_and_split(gaussian_blobs(240, 2, separation=2.0, seed=9), 0.5, 0))
        space = SearchSpace(trials=25, seed=0)
        res = random_search(train, test, WIN2, space, precond=PRECOND, operator="exact")
        assert len(res.log) == 25
        baseline = res.log[0]
        assert baseline.C == 0.4 and np.all(baseline.length_scales == 1.0)
        assert res.best_trial.accuracy >= baseline.accuracy
        assert res.best_trial.accuracy == max(t.accuracy for t in res.log)
        # ties resolve to the earliest trial
        assert res.best_trial.trial == min(t.trial for t in res.log if t.accuracy == res.best_trial.accuracy)

    def test_reproducible(self, circles):
        train, test = circles
        space = SearchSpace(trials=3, seed=4)
        a = random_search(train, test, WIN2, space, precond=PRECOND, operator="exact")
        b = random_search(train, test, WIN2, space, precond=PRECOND, operator="exact")
        assert [t.accuracy for t in a.log] == [t.accuracy for t in b.log]
        assert [t.C for t in a.log] == [t.C for t in b.log]

    def test_all_stalled_carries_log(self, circles):
        train, test = circles
        cfg = IpmConfig(max_gmres_iters=1, tol_gmres=1e-12)
        with pytest.raises(SolverStalled) as info:
            random_search(train, test, WIN2, SearchSpace(trials=2, seed=0), cfg,
                          PrecondConfig(method="none"), operator="exact")
        assert [t.status for t in info.value.result] == ["stalled", "stalled"]


def test_trial_log_csv(circles, tmp_path):
    train, test = circles
    res = random_search(train, test, WIN2, SearchSpace(trials=2, seed=1), precond=PRECOND, operator="exact")
    path = tmp_path / "trials.csv"
    write_trial_log(res.log, path, 1)
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == trial_log_header(1)
    assert rows[0][:3] == ["trial", "ell_1", "C"]
    assert len(rows) == 3
    assert float(rows[1][3]) == res.log[0].accuracy
