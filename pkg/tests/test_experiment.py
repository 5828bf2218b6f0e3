import json

import numpy as np
import pytest

from kernelsubset.alignment import alignment_objective
from kernelsubset.dataset import Dataset, pair_structure_from_arrays, save_csv
from kernelsubset.experiment import (
    ExperimentConfig,
    cls_acc,
    configs_from_obj,
    format_table,
    mean_se,
    results_to_json,
    run_experiment,
    set_f1,
)
from kernelsubset.synthgen import GenConfig, generate


def forced_files(tmp_path):
    """Feature 0 separates the classes, feature 1 repeats within each pair of rows."""
    y = np.array([1, 1, -1, -1] * 3)
    x0 = y * np.linspace(1.0, 2.0, 12)
    x1 = np.repeat([0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 2)
    tr = tmp_path / "train.csv"
    save_csv(Dataset(np.c_[x0, x1], y), tr)
    te = tmp_path / "test.csv"
    save_csv(Dataset(np.c_[x0 * 1.1, x1[::-1]], y), te)
    return str(tr), str(te)


class TestMetrics:
    def test_set_f1(self):
        assert set_f1({1, 2, 3}, {1, 2}) == pytest.approx(0.8)
        assert set_f1({1, 2, 3}, {1, 2, 3}) == 1.0
        assert set_f1({1, 2}, {3, 4}) == 0.0
        assert set_f1({1}, set()) == 0.0
        with pytest.raises(ValueError):
            set_f1(set(), {1})

    def test_cls_acc(self):
        assert cls_acc([1, -1, 1], [1, -1, 1]) == 1.0
        assert cls_acc([1, 1], [-1, -1]) == 0.0
        assert cls_acc([1, 1, -1, -1], [1, 1, -1, 1]) == 0.75
        with pytest.raises(ValueError, match="length"):
            cls_acc([1, 1], [1])

    def test_mean_se(self):
        assert mean_se([0.7]) == (0.7, 0.0)
        m, se = mean_se([1.0, 2.0, 3.0])
        assert m == 2.0 and se == pytest.approx(1 / np.sqrt(3))


class TestConfig:
    def test_invalid(self):
        gen = GenConfig(n_train=10, n_test=10, p=4, theta_star=2)
        with pytest.raises(ValueError):
            ExperimentConfig(methods=("svm",), gen=gen)
        with pytest.raises(ValueError):
            ExperimentConfig(repetitions=0, gen=gen)
        with pytest.raises(ValueError):
            ExperimentConfig(beta=0, gen=gen)
        with pytest.raises(ValueError):
            ExperimentConfig()

    def test_default_seeds(self):
        cfg = ExperimentConfig(repetitions=3, gen=GenConfig(seed=5))
        assert cfg.seeds == (5, 6, 7)

    def test_grid(self):
        raw = {"base": {"methods": ["bnb"], "gen": {"n_train": 20, "n_test": 10, "p": 5}},
               "grid": {"beta": [0.25, 4.0], "gen.expansion": [25, 100]}}
        cfgs = configs_from_obj(raw)
        assert len(cfgs) == 4
        assert {(c.beta, c.gen.expansion) for c in cfgs} == {(0.25, 25), (0.25, 100), (4.0, 25), (4.0, 100)}
        assert all(c.name for c in cfgs)


class TestRun:
    def test_forced_brute_recovers(self, tmp_path):
        tr, te = forced_files(tmp_path)
        cfg = ExperimentConfig(methods=("brute", "bnb"), theta=1, repetitions=3, train_path=tr, test_path=te,
                               relevant=(0,))
        for row in run_experiment(cfg):
            assert row.failed == 0
            assert [r.set_f1 for r in row.runs] == [1.0, 1.0, 1.0]
            assert row.set_f1_mean == 1.0 and row.set_f1_se == 0.0
            assert row.cls_acc_mean == 1.0

    def test_objective_recomputed(self):
        cfg = ExperimentConfig(methods=("bnb",), theta=2, repetitions=2,
                               gen=GenConfig(n_train=20, n_test=50, p=6, theta_star=2, seed=3))
        (row,) = run_experiment(cfg)
        for run, seed in zip(row.runs, cfg.seeds):
            d = generate(GenConfig(n_train=20, n_test=50, p=6, theta_star=2, seed=seed))
            ps = pair_structure_from_arrays(d.train.x, d.train.y)
            z = [1 if j in run.subset else 0 for j in range(6)]
            assert run.status == "optimal"
            assert run.objective == pytest.approx(alignment_objective(ps, z, run.gamma), abs=1e-9)

    def test_single_rep_stderr(self):
        cfg = ExperimentConfig(methods=("greedy",), gen=GenConfig(n_train=20, n_test=30, p=5, theta_star=2))
        (row,) = run_experiment(cfg)
        assert row.cls_acc_se == 0.0 and row.set_f1_se == 0.0
        assert 0 <= row.cls_acc_mean <= 1 and 0 <= row.set_f1_mean <= 1

    def test_time_limit(self):
        cfg = ExperimentConfig(methods=("bnb",), theta=5, time_limit_s=0,
                               gen=GenConfig(n_train=40, n_test=20, p=20, theta_star=3))
        (row,) = run_experiment(cfg)
        assert row.time_limit_hit
        assert row.runs[0].status == "time_limit"
        assert row.runs[0].subset
        assert ">0.0" in format_table([(cfg, [row])])

    def test_failure_recorded(self, tmp_path):
        cfg = ExperimentConfig(methods=("bnb", "greedy"), repetitions=2, train_path=str(tmp_path / "missing.csv"))
        rows = run_experiment(cfg)
        assert all(r.failed == 2 and len(r.reasons) == 2 for r in rows)
        assert "failed" in format_table([(cfg, rows)])

    def test_json_without_time_is_reproducible(self):
        cfg = ExperimentConfig(methods=("bnb", "greedy", "rfe"), repetitions=2,
                               gen=GenConfig(n_train=20, n_test=30, p=6, theta_star=2, seed=11))
        a = results_to_json([(cfg, run_experiment(cfg))], timing=False)
        b = results_to_json([(cfg, run_experiment(cfg))], timing=False)
        assert a == b
        assert "time_s" not in a
        assert json.loads(a)[0]["config"]["seeds"] == [11, 12]
