"""Error measures and the interpolation/extrapolation benchmark harness.

Five measures are reported per method: RMSE and MAE on the response scale,
the mean point-wise error rate ER1, and the mean-normalized versions
ER2 = RMSE / mean(y) and ER3 = MAE / mean(y).  The benchmark fits one model
per variability map on training data, predicts that map's test points, and
pools all predictions across maps into a single report per method; all
metrics are computed on the original (untransformed) response scale.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._errors import FitError, VmapError
from .dataspace import DatasetSplit, VariabilityObservation
from .surrogates import ModelSpec, fit, predict

MODES = ("interpolation", "extrapolation")


@dataclass(frozen=True)
class ErrorReport:
    method: str
    mode: str
    n: int
    er1: float
    er2: float
    er3: float
    rmse: float
    mae: float
    ratios: tuple[float, ...]


def compute_metrics(
    truth: Sequence[float],
    predictions: Sequence[float],
    method: str = "",
    mode: str = "",
) -> ErrorReport:
    """All five error measures plus the per-point prediction ratios."""
    y = np.asarray(truth, dtype=float)
    yhat = np.asarray(predictions, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise VmapError(f"truth and predictions must be equal-length vectors, got {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise VmapError("metrics need at least one point")
    if np.any(y <= 0):
        raise VmapError("all truth values must be positive for ratio-based measures")

    n = y.size
    err = yhat - y
    ratios = yhat / y
    rmse = math.sqrt(float(err @ err) / n)
    mae = float(np.abs(err).sum()) / n
    mean_y = float(y.sum()) / n
    return ErrorReport(
        method=method,
        mode=mode,
        n=n,
        er1=float(np.abs(ratios - 1.0).sum()) / n,
        er2=rmse / mean_y,
        er3=mae / mean_y,
        rmse=rmse,
        mae=mae,
        ratios=tuple(float(r) for r in ratios),
    )


def _group_key(spec: ModelSpec, obs: VariabilityObservation):
    # CGP pools the scheduler levels of one operation mode into a single model
    if spec.kind == "CGP":
        return obs.config.io_mode
    return (obs.config.io_mode, obs.config.io_scheduler, obs.config.vm_io_scheduler)


def _grouped(spec: ModelSpec, observations: Sequence[VariabilityObservation]):
    groups: dict = {}
    for obs in observations:
        groups.setdefault(_group_key(spec, obs), []).append(obs)
    return groups


def run_benchmark(
    methods: Sequence[ModelSpec],
    split: DatasetSplit,
    mode: str,
    jobs: int = 1,
) -> list[ErrorReport]:
    """Fit/predict every method over all variability maps and pool the errors.

    Interpolation models the response on the log scale; extrapolation models
    it on the original scale (log-scale extrapolation explodes under
    exponentiation).  Maps without test points are skipped; a fit failure
    aborts the run naming the failing map.
    """
    if mode not in MODES:
        raise VmapError(f"mode must be one of {MODES}, got {mode!r}")
    test_set = split.interpolation_test if mode == "interpolation" else split.extrapolation_test
    if not test_set:
        raise VmapError(f"the {mode} test set is empty")
    scale = "log" if mode == "interpolation" else "raw"

    reports = []
    for spec in methods:
        run_spec = replace(spec, response_scale=scale)
        train_groups = _grouped(run_spec, split.training)
        test_groups = _grouped(run_spec, test_set)
        ordered_keys = sorted(test_groups)

        def fit_and_predict(group_key):
            train = train_groups.get(group_key)
            if not train:
                raise FitError(f"map {group_key}: no training observations")
            try:
                model = fit(run_spec, train)
            except VmapError as exc:
                raise FitError(f"map {group_key}: {exc}") from exc
            group = test_groups[group_key]
            preds = [predict(model, obs.point, obs.key) for obs in group]
            truths = [obs.pvm for obs in group]
            return truths, preds

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(fit_and_predict, ordered_keys))
        else:
            results = [fit_and_predict(k) for k in ordered_keys]

        truth_all: list[float] = []
        pred_all: list[float] = []
        for truths, preds in results:
            truth_all.extend(truths)
            pred_all.extend(preds)
        reports.append(compute_metrics(truth_all, pred_all, method=spec.kind, mode=mode))
    return reports


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".12g")


def export_reports(reports: Sequence[ErrorReport], destination: str | Path) -> None:
    """Write one row per report: method, mode, n, er1, rmse, er2, mae, er3."""
    with open(destination, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "mode", "n", "er1", "rmse", "er2", "mae", "er3"])
        for r in reports:
            writer.writerow(
                [r.method, r.mode, r.n, _fmt(r.er1), _fmt(r.rmse), _fmt(r.er2), _fmt(r.mae), _fmt(r.er3)]
            )


def export_ratio_distribution(reports: Sequence[ErrorReport], destination: str | Path) -> None:
    """Long-format per-point prediction ratios, ready for box-plot rendering."""
    with open(destination, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "mode", "point_index", "ratio"])
        for r in reports:
            for index, ratio in enumerate(r.ratios):
                writer.writerow([r.method, r.mode, index, _fmt(ratio)])


def boxplot_rows(ratio_rows: Sequence[tuple[str, str, float]]) -> list[dict]:
    """Box-plot geometry (quartiles and 1.5*IQR whiskers) per (method, mode)."""
    groups: dict[tuple[str, str], list[float]] = {}
    for method, mode, ratio in ratio_rows:
        groups.setdefault((method, mode), []).append(float(ratio))
    rows = []
    for (method, mode), values in sorted(groups.items()):
        arr = np.sort(np.asarray(values))
        q1, median, q3 = np.percentile(arr, [25, 50, 75])
        iqr = q3 - q1
        lo_bound, hi_bound = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = arr[(arr >= lo_bound) & (arr <= hi_bound)]
        whisker_lo = float(inside[0]) if inside.size else float(arr[0])
        whisker_hi = float(inside[-1]) if inside.size else float(arr[-1])
        rows.append(
            {
                "method": method,
                "mode": mode,
                "n": arr.size,
                "q1": float(q1),
                "median": float(median),
                "q3": float(q3),
                "whisker_lo": whisker_lo,
                "whisker_hi": whisker_hi,
                "n_outliers": int(arr.size - inside.size),
            }
        )
    return rows
