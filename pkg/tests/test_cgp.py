"""Categorical Gaussian process: covariance structure, interpolation, MLE."""

import math

import numpy as np
import pytest

from vmap import FitError, ModelSpec, VmapError, fit, predict
from vmap.dataspace import SystemConfiguration, VariabilityMapKey, VariabilityObservation, encode_point
from vmap.surrogates import corr_from_angles, fit_cgp_arrays
from vmap._kernels import cgp_corr


class TestAngleParameterization:
    @pytest.mark.parametrize("seed", [1, 2, 3, 4])
    def test_unit_diagonal_positive_definite(self, seed):
        rng = np.random.default_rng(seed)
        tau = corr_from_angles(rng.uniform(0.1, math.pi - 0.1, size=3))
        np.testing.assert_allclose(np.diag(tau), 1.0, atol=1e-14)
        np.testing.assert_allclose(tau, tau.T, atol=1e-15)
        assert np.linalg.eigvalsh(tau).min() > 0

    def test_right_angles_give_identity(self):
        np.testing.assert_allclose(corr_from_angles(np.full(3, math.pi / 2)), np.eye(3), atol=1e-15)


class TestCovarianceStructure:
    def test_two_point_product_example(self):
        # continuous factor 0.5 times category factors 0.8 and 0.9 gives 0.36
        theta = np.array([math.log(2.0), 0.0, 0.0, 0.0])  # exp(-theta * 1) = 0.5
        x = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
        tau_io = np.array([[1.0, 0.8, 0.0], [0.8, 1.0, 0.0], [0.0, 0.0, 1.0]])
        tau_vm = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.0]])
        zio = np.array([0, 1], dtype=np.int64)
        zvm = np.array([0, 1], dtype=np.int64)
        corr = cgp_corr(x, zio, zvm, x, zio, zvm, theta, tau_io, tau_vm)
        assert corr[0, 1] == pytest.approx(0.36, abs=1e-12)

    def test_identical_points_have_unit_correlation(self):
        theta = np.array([1.0, 2.0, 3.0, 4.0])
        x = np.array([[0.3, 0.4, 0.5, 0.6]] * 2)
        codes = np.array([2, 2], dtype=np.int64)
        tau = corr_from_angles(np.array([0.4, 1.1, 0.8]))
        corr = cgp_corr(x, codes, codes, x, codes, codes, theta, tau, tau)
        assert corr[0, 1] == pytest.approx(1.0, abs=1e-14)

    def test_training_covariance_spd_after_nugget(self):
        rng = np.random.default_rng(53)
        n = 60
        x = rng.uniform(size=(n, 4))
        zio = rng.integers(0, 3, n).astype(np.int64)
        zvm = rng.integers(0, 3, n).astype(np.int64)
        y = np.sin(5 * x[:, 0]) + x[:, 1]
        model = fit_cgp_arrays(x, y, zio, zvm, restarts=2, seed=3, maxiter=20)
        corr = model.correlation_matrix()
        np.testing.assert_allclose(corr, corr.T, atol=1e-13)
        eigs = np.linalg.eigvalsh(corr + model.nugget * np.eye(n))
        assert eigs.min() > 0


class TestFit:
    def test_interpolates_training_points(self):
        rng = np.random.default_rng(54)
        n = 80
        x = rng.uniform(size=(n, 4))
        zio = rng.integers(0, 3, n).astype(np.int64)
        zvm = rng.integers(0, 3, n).astype(np.int64)
        y = np.sin(6 * x[:, 0]) + np.cos(4 * x[:, 1]) + x[:, 2] * x[:, 3]
        model = fit_cgp_arrays(x, y, zio, zvm, restarts=3, nugget=1e-10, seed=5, maxiter=40)
        np.testing.assert_allclose(model.predict_values(x, zio, zvm), y, atol=1e-6)

    def test_likelihood_dominates_every_start(self):
        rng = np.random.default_rng(55)
        n = 50
        x = rng.uniform(size=(n, 4))
        zio = rng.integers(0, 3, n).astype(np.int64)
        zvm = rng.integers(0, 3, n).astype(np.int64)
        y = x @ np.array([1.0, -2.0, 0.5, 2.0]) + 0.05 * rng.standard_normal(n)
        model = fit_cgp_arrays(x, y, zio, zvm, restarts=5, seed=6, maxiter=30)
        assert model.loglik >= max(model.restart_initial_logliks) - 1e-9

    def test_scheduler_free_data_predicts_uniformly(self):
        # responses ignore the categorical codes, so predictions at one x
        # should agree across all scheduler levels
        rng = np.random.default_rng(56)
        n = 180
        x = rng.uniform(size=(n, 4))
        zio = np.tile(np.array([0, 1, 2], dtype=np.int64), n // 3)
        zvm = np.roll(zio, 1).copy()
        y = 2.0 + x @ np.array([0.5, -0.3, 0.8, 1.0]) + 0.01 * rng.standard_normal(n)
        model = fit_cgp_arrays(x, y, zio, zvm, restarts=5, seed=7, maxiter=60)
        queries = rng.uniform(0.2, 0.8, size=(12, 4))
        values = []
        for io_code in range(3):
            for vm_code in range(3):
                codes_io = np.full(12, io_code, dtype=np.int64)
                codes_vm = np.full(12, vm_code, dtype=np.int64)
                values.append(model.predict_values(queries, codes_io, codes_vm))
        values = np.asarray(values)
        spread = np.abs(values - values.mean(axis=0)).max(axis=0)
        assert (spread / np.abs(values.mean(axis=0))).max() < 0.05

    def test_bad_scheduler_codes_rejected(self):
        x = np.random.default_rng(57).uniform(size=(10, 4))
        with pytest.raises(FitError, match="codes"):
            fit_cgp_arrays(x, np.ones(10), np.full(10, 5, dtype=np.int64),
                           np.zeros(10, dtype=np.int64), restarts=1)

    def test_non_finite_inputs_rejected(self):
        x = np.random.default_rng(58).uniform(size=(12, 4))
        y = np.full(12, np.nan)
        codes = np.zeros(12, dtype=np.int64)
        with pytest.raises(FitError, match="finite"):
            fit_cgp_arrays(x, y, codes, codes, restarts=2, seed=8, maxiter=5)

    def test_non_finite_likelihood_everywhere(self):
        # responses large enough to overflow the quadratic form at every start
        rng = np.random.default_rng(59)
        x = rng.uniform(size=(12, 4))
        y = 1e200 * np.where(np.arange(12) % 2 == 0, 1.0, -1.0)
        codes = np.zeros(12, dtype=np.int64)
        with pytest.raises(FitError, match="non-finite"):
            fit_cgp_arrays(x, y, codes, codes, restarts=2, seed=8, maxiter=5)


def _mode_observations(n_per_combo=6, seed=59):
    rng = np.random.default_rng(seed)
    out = []
    for io_sched in ("CFQ", "DEAD", "NOOP"):
        for vm_sched in ("CFQ", "DEAD", "NOOP"):
            for _ in range(n_per_combo):
                record = int(rng.choice([32, 64]))
                cfg = SystemConfiguration(
                    "Randomread", io_sched, vm_sched,
                    float(rng.uniform(1.2, 3.0)),
                    int(rng.choice([1, 4, 16, 64])),
                    record * int(rng.choice([2, 4, 8])),
                    record,
                )
                point = encode_point(cfg)
                pvm = 5.0 + 2.0 * point.x4 + 0.3 * point.x3 + 0.05 * float(rng.standard_normal())
                out.append(VariabilityObservation(cfg, point, pvm, 1000.0, 40))
    return out


class TestUniformContract:
    def test_fit_one_mode_predict_with_key(self):
        data = _mode_observations()
        spec = ModelSpec("CGP", "raw", {"restarts": 2, "seed": 9, "maxiter": 20})
        model = fit(spec, data)
        assert model.io_mode == "Randomread"
        key = VariabilityMapKey("Randomread", "DEAD", "NOOP")
        value = predict(model, data[0].point, key)
        assert np.isfinite(value)

    def test_mixed_modes_rejected(self):
        data = _mode_observations()
        other = _mode_observations(seed=61)
        renamed = [
            VariabilityObservation(
                SystemConfiguration("Rewrite", o.config.io_scheduler, o.config.vm_io_scheduler,
                                    o.config.frequency, o.config.threads,
                                    o.config.file_size, o.config.record_size),
                o.point, o.pvm, o.mean_throughput, o.n_runs)
            for o in other[:5]
        ]
        spec = ModelSpec("CGP", "raw", {"restarts": 1, "seed": 9})
        with pytest.raises(FitError, match="one operation mode"):
            fit(spec, data + renamed)

    def test_wrong_mode_key_rejected_at_predict(self):
        data = _mode_observations()
        spec = ModelSpec("CGP", "raw", {"restarts": 1, "seed": 9, "maxiter": 10})
        model = fit(spec, data)
        with pytest.raises(VmapError, match="mode"):
            predict(model, data[0].point, VariabilityMapKey("Rewrite", "CFQ", "CFQ"))

    def test_key_required_for_cgp_predictions(self):
        data = _mode_observations()
        spec = ModelSpec("CGP", "raw", {"restarts": 1, "seed": 9, "maxiter": 10})
        model = fit(spec, data)
        with pytest.raises(VmapError, match="key"):
            predict(model, data[0].point)
