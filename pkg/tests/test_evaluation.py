"""Error measures, the pooled benchmark harness, and report exports."""

import csv
import math

import numpy as np
import pytest

from vmap import ModelSpec, VmapError, compute_metrics, run_benchmark, split_dataset
from vmap.evaluation import boxplot_rows, export_ratio_distribution, export_reports

from _synth import desk_split_spec


def loop_metrics(truth, predictions):
    """Independent loop-and-accumulate re-implementation of all five measures."""
    n = len(truth)
    se = 0.0
    ae = 0.0
    rate = 0.0
    total = 0.0
    for y, yhat in zip(truth, predictions):
        se += (yhat - y) ** 2
        ae += abs(yhat - y)
        rate += abs(yhat / y - 1.0)
        total += y
    rmse = math.sqrt(se / n)
    mae = ae / n
    mean = total / n
    return rate / n, rmse, rmse / mean, mae, mae / mean


class TestComputeMetrics:
    def test_hand_example(self):
        report = compute_metrics([1.0, 2.0], [2.0, 4.0])
        assert report.er1 == pytest.approx(1.0, abs=1e-15)
        assert report.rmse == pytest.approx(math.sqrt(2.5), rel=1e-15)
        assert report.er2 == pytest.approx(math.sqrt(2.5) / 1.5, rel=1e-15)
        assert report.mae == pytest.approx(1.5, abs=1e-15)
        assert report.er3 == pytest.approx(1.0, abs=1e-15)
        assert report.n == 2

    def test_perfect_prediction(self):
        y = [0.5, 1.5, 9.0]
        report = compute_metrics(y, list(y))
        assert (report.er1, report.er2, report.er3, report.rmse, report.mae) == (0, 0, 0, 0, 0)
        assert report.ratios == (1.0, 1.0, 1.0)

    def test_scale_homogeneity(self):
        rng = np.random.default_rng(71)
        y = rng.uniform(1, 5, size=40)
        yhat = y * rng.uniform(0.5, 1.5, size=40)
        base = compute_metrics(y, yhat)
        scaled = compute_metrics(10 * y, 10 * yhat)
        assert scaled.er1 == pytest.approx(base.er1, rel=1e-12)
        assert scaled.er2 == pytest.approx(base.er2, rel=1e-12)
        assert scaled.er3 == pytest.approx(base.er3, rel=1e-12)
        assert scaled.rmse == pytest.approx(10 * base.rmse, rel=1e-12)
        assert scaled.mae == pytest.approx(10 * base.mae, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(72)
        y = rng.uniform(1, 5, size=25)
        yhat = rng.uniform(1, 5, size=25)
        perm = rng.permutation(25)
        a = compute_metrics(y, yhat)
        b = compute_metrics(y[perm], yhat[perm])
        for field in ("er1", "er2", "er3", "rmse", "mae"):
            assert getattr(a, field) == pytest.approx(getattr(b, field), rel=1e-12)

    def test_identities_and_oracle_on_random_instances(self):
        rng = np.random.default_rng(73)
        for _ in range(25):
            y = rng.uniform(0.1, 10, size=50)
            yhat = rng.uniform(0.1, 10, size=50)
            report = compute_metrics(y, yhat)
            er1, rmse, er2, mae, er3 = loop_metrics(y, yhat)
            assert report.er1 == pytest.approx(er1, rel=1e-12)
            assert report.rmse == pytest.approx(rmse, rel=1e-12)
            assert report.er2 == pytest.approx(er2, rel=1e-12)
            assert report.mae == pytest.approx(mae, rel=1e-12)
            assert report.er3 == pytest.approx(er3, rel=1e-12)
            mean = y.mean()
            assert report.er2 * mean == pytest.approx(report.rmse, rel=1e-12)
            assert report.er3 * mean == pytest.approx(report.mae, rel=1e-12)
            assert report.rmse >= report.mae

    def test_input_validation(self):
        with pytest.raises(VmapError):
            compute_metrics([1.0], [1.0, 2.0])
        with pytest.raises(VmapError):
            compute_metrics([], [])
        with pytest.raises(VmapError):
            compute_metrics([1.0, 0.0], [1.0, 1.0])


class TestRunBenchmark:
    @pytest.fixture(scope="class")
    def desk_split(self, desk_data):
        return split_dataset(desk_data, desk_split_spec())

    def test_pooled_counts(self, desk_split):
        reports = run_benchmark([ModelSpec("LM")], desk_split, "interpolation")
        assert reports[0].n == len(desk_split.interpolation_test) == 18
        reports = run_benchmark([ModelSpec("LM")], desk_split, "extrapolation")
        assert reports[0].n == len(desk_split.extrapolation_test) == 54

    def test_identical_specs_identical_reports(self, desk_split):
        a, b = run_benchmark([ModelSpec("LSP"), ModelSpec("LSP")], desk_split, "interpolation")
        assert a.ratios == b.ratios
        assert a.er1 == b.er1

    def test_jobs_do_not_change_results(self, desk_split):
        (serial,) = run_benchmark([ModelSpec("MARS")], desk_split, "interpolation", jobs=1)
        (threaded,) = run_benchmark([ModelSpec("MARS")], desk_split, "interpolation", jobs=4)
        assert serial.ratios == threaded.ratios

    def test_extrapolation_forces_raw_scale(self, desk_split):
        (log_spec,) = run_benchmark([ModelSpec("LM", "log")], desk_split, "extrapolation")
        (raw_spec,) = run_benchmark([ModelSpec("LM", "raw")], desk_split, "extrapolation")
        assert log_spec.ratios == raw_spec.ratios

    def test_interpolation_forces_log_scale(self, desk_split):
        (raw_spec,) = run_benchmark([ModelSpec("LM", "raw")], desk_split, "interpolation")
        (log_spec,) = run_benchmark([ModelSpec("LM", "log")], desk_split, "interpolation")
        assert raw_spec.ratios == log_spec.ratios

    def test_training_mean_predictor_scores_pooled_cv(self, desk_split):
        # predicting each map's training mean makes ER2 the pooled coefficient
        # of variation of the test responses around those means
        groups: dict = {}
        for obs in desk_split.training:
            groups.setdefault(obs.key, []).append(obs.pvm)
        means = {key: float(np.mean(vals)) for key, vals in groups.items()}
        truth = [obs.pvm for obs in desk_split.interpolation_test]
        preds = [means[obs.key] for obs in desk_split.interpolation_test]
        report = compute_metrics(truth, preds)
        y = np.asarray(truth)
        yhat = np.asarray(preds)
        expected = math.sqrt(np.mean((yhat - y) ** 2)) / y.mean()
        assert report.er2 == pytest.approx(expected, rel=1e-12)

    def test_fit_failure_names_the_map(self, desk_split):
        # starving one map of training data must abort with its key
        key = desk_split.interpolation_test[0].key
        broken = [obs for obs in desk_split.training if obs.key != key]
        from vmap.dataspace import DatasetSplit
        from vmap import FitError

        split = DatasetSplit(broken, desk_split.interpolation_test, desk_split.extrapolation_test)
        with pytest.raises(FitError, match=str(key.io_mode)):
            run_benchmark([ModelSpec("LM")], split, "interpolation")

    def test_unknown_mode_rejected(self, desk_split):
        with pytest.raises(VmapError):
            run_benchmark([ModelSpec("LM")], desk_split, "transpolation")


class TestExports:
    def _reports(self):
        return [
            compute_metrics([1.0, 2.0], [2.0, 4.0], method="LM", mode="interpolation"),
            compute_metrics([1.0, 4.0], [1.0, 4.0], method="LSP", mode="interpolation"),
        ]

    def test_report_csv_layout_and_round_trip(self, tmp_path):
        path = tmp_path / "report.csv"
        reports = self._reports()
        export_reports(reports, path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["method", "mode", "n", "er1", "rmse", "er2", "mae", "er3"]
        assert len(rows) == 3
        parsed = float(rows[1][4])
        assert parsed == pytest.approx(reports[0].rmse, rel=1e-11)

    def test_empty_reports_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_reports([], path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 1

    def test_ratio_rows(self, tmp_path):
        path = tmp_path / "ratios.csv"
        reports = self._reports()
        export_ratio_distribution(reports, path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["method", "mode", "point_index", "ratio"]
        assert len(rows) - 1 == sum(r.n for r in reports)
        perfect = [row for row in rows[1:] if row[0] == "LSP"]
        assert all(float(row[3]) == 1.0 for row in perfect)

    def test_boxplot_rows(self):
        triples = [("LM", "interpolation", r) for r in (0.5, 0.9, 1.0, 1.1, 1.5, 9.0)]
        (row,) = boxplot_rows(triples)
        assert row["q1"] <= row["median"] <= row["q3"]
        assert row["n"] == 6
        assert row["n_outliers"] == 1  # the 9.0 ratio
