import numpy as np
import pytest

from interpnn.core import LabeledDataset, RngSeed, Task
from interpnn.errors import ConfigInvalidError, NonBinaryLabelError
from interpnn.experiments import (
    CIS_COLUMNS,
    RATE_COLUMNS,
    RATIO_COLUMNS,
    REAL_COLUMNS,
    ExperimentConfig,
    _paired_ratio,
    geometric_grid,
    run_cis_curve,
    run_rate_check,
    run_ratio_curve,
    run_real_data,
    select_k,
)
from interpnn.simgen import MixtureModel, sample
from interpnn.theory import pr


def small(study, **kw):
    base = dict(study=study, d=2, n=96, n_grid=(32, 64, 128), gamma_over_d=(0.1, 0.3, 0.35),
                reps_regression=4, reps_classification=4, reps=4, n_test=200, seed=3, threads=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_zero_always_in_grid(self):
        assert small("ratio", gamma_over_d=(0.2, 0.1)).gamma_over_d == (0.0, 0.1, 0.2)

    @pytest.mark.parametrize("kw", [
        dict(study="nope"), dict(d=0), dict(reps=0), dict(gamma_over_d=(0.5,)),
        dict(gamma_over_d=(-0.1,)), dict(k_policy="best"), dict(k_grid="sparse"),
        dict(n_test=0), dict(n=1), dict(k_max=96), dict(train_fraction=1.0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigInvalidError):
            small(**{"study": "ratio", **kw}).validate()

    def test_out_of_regime_override(self):
        small("ratio", gamma_over_d=(0.5,), allow_out_of_regime=True).validate()

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("INTERPNN_THREADS", "3")
        assert ExperimentConfig().worker_count() == 3
        assert ExperimentConfig(threads=2).worker_count() == 2

    def test_wrong_study(self):
        with pytest.raises(ConfigInvalidError):
            run_ratio_curve(small("cis"))


class TestKSelection:
    def test_geometric_grid(self):
        g = geometric_grid(100)
        assert g[0] == 1 and g[-1] == 100 and np.all(np.diff(g) >= 1)
        assert geometric_grid(1).tolist() == [1]

    def test_select_refines_around_coarse_minimum(self):
        ks = np.arange(1, 201)
        curve = (ks - 57.0) ** 2
        assert select_k(curve, "full") == 56
        assert select_k(curve, "geometric") + 1 == 57

    def test_ties_to_smaller_k(self):
        assert select_k(np.array([3.0, 1.0, 1.0, 2.0]), "full") == 1
        assert select_k(np.array([3.0, 1.0, 1.0, 2.0]), "geometric") == 1

    def test_paired_ratio(self):
        vals = np.array([[2.0, 1.0, 3.0], [4.0, 3.0, 5.0]])
        means, ratios, errs = _paired_ratio(vals)
        assert means.tolist() == [3.0, 2.0, 4.0]
        assert ratios[0] == 1.0 and errs[0] == 0.0
        assert ratios[1] == pytest.approx(2 / 3)


class TestRatioCurve:
    def test_shape_and_base(self):
        cfg = small("ratio")
        res = run_ratio_curve(cfg)
        assert len(res.rows) == 2 * len(cfg.gamma_over_d)
        assert res.columns == RATIO_COLUMNS
        for rec in res.records():
            assert tuple(rec) == RATIO_COLUMNS
        for metric in ("mse", "regret"):
            rows = res.metric_rows(metric)
            assert rows[0].gamma == 0.0 and rows[0].sim_ratio == 1.0
            assert rows[-1].gamma_over_d == 0.35 and rows[-1].theory is None
            assert rows[1].theory == pr(2, 0.2)

    def test_gamma_zero_only(self):
        res = run_ratio_curve(small("ratio", gamma_over_d=()))
        assert [r.sim_ratio for r in res.rows] == [1.0, 1.0]

    def test_deterministic_across_threads(self):
        a = run_ratio_curve(small("ratio", threads=1)).records()
        b = run_ratio_curve(small("ratio", threads=3)).records()
        assert a == b

    def test_seed_changes_result(self):
        a = run_ratio_curve(small("ratio", seed=1)).records()
        b = run_ratio_curve(small("ratio", seed=2)).records()
        assert a != b

    def test_pooled_policy(self):
        res = run_ratio_curve(small("ratio", k_policy="pooled", k_grid="full"))
        ks = res.extra["mse"]["best_k"]
        assert np.all(ks == ks[0])


class TestCisCurve:
    def test_identical_training_sets(self):
        res = run_cis_curve(small("cis", cis_same_train=True))
        assert all(np.all(res.extra[key] == 0.0) for key in ("cis_optimal", "cis_fixed"))

    def test_rows(self):
        cfg = small("cis")
        res = run_cis_curve(cfg)
        assert res.columns == CIS_COLUMNS
        recs = res.records()
        assert len(recs) == 2 * len(cfg.gamma_over_d)
        assert {r["k_policy"] for r in recs} == {"optimal", "fixed"}
        assert all(r["theory_sqrt_pr"] is None for r in recs if r["k_policy"] == "fixed")
        opt = [r for r in recs if r["k_policy"] == "optimal"]
        assert opt[0]["sim_cis_ratio"] == 1.0
        assert opt[1]["theory_sqrt_pr"] == pytest.approx(np.sqrt(pr(2, 0.2)))

    def test_fixed_rows_share_k(self):
        res = run_cis_curve(small("cis"))
        fixed = [r for r in res.rows if r.metric == "fixed"]
        assert len({r.mean_best_k for r in fixed}) == 1


class TestRateCheck:
    def test_table(self):
        cfg = small("rate", gamma_over_d=(0.2,))
        res = run_rate_check(cfg)
        assert res.columns == RATE_COLUMNS
        assert len(res.rows) == 2 * 3
        assert all(tuple(r) == RATE_COLUMNS for r in res.rows)
        assert set(res.slopes) == {0.0, 0.4}
        assert all(np.isfinite(s) for s in res.slopes.values())
        assert res.per_rep_best_k[(128, 0.4)].shape == (4,)


class TestRealData:
    def _data(self, n=120, seed=5):
        return sample(MixtureModel(2), n, RngSeed(seed))

    def test_table(self):
        cfg = small("real")
        res = run_real_data(self._data(), cfg, "toy")
        assert res.columns == REAL_COLUMNS
        assert [r["gamma_over_d"] for r in res.rows] == list(cfg.gamma_over_d)
        assert sum(r["best_flag"] for r in res.rows) == 1
        assert all(0.0 <= r["mean_error"] <= 1.0 for r in res.rows)

    def test_single_class(self):
        x = np.random.default_rng(0).normal(size=(60, 3))
        ds = LabeledDataset(x, np.ones(60), Task.CLASSIFICATION)
        res = run_real_data(ds, small("real"))
        assert all(r["mean_error"] == 0.0 for r in res.rows)

    def test_row_order_free(self):
        ds = self._data()
        perm = np.random.default_rng(1).permutation(ds.n)
        shuffled = LabeledDataset(ds.points[perm], ds.labels[perm], Task.CLASSIFICATION)
        cfg = small("real")
        assert run_real_data(ds, cfg).rows == run_real_data(shuffled, cfg).rows

    def test_regression_labels_must_be_binary(self):
        ds = LabeledDataset(np.arange(10.0)[:, None], np.linspace(0, 1, 10))
        with pytest.raises(NonBinaryLabelError):
            run_real_data(ds, small("real"))
