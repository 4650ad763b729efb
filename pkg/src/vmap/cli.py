"""Command-line interface: reproducible batch runs over the toolkit.

Subcommands: ingest, fit, predict, evaluate, optimize, export-plot-data.
Every command writes a manifest (inputs, parameters, seed, version,
timestamp) next to its main output.  Log verbosity follows the VMAP_LOG
environment variable (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from ._errors import VmapError
from .dataspace import (
    RUNS_COLUMNS,
    SplitSpec,
    SystemConfiguration,
    compute_pvm,
    default_split_spec,
    encode_point,
    ingest_runs,
    read_observations,
    write_observations,
)
from .evaluation import boxplot_rows, export_ratio_distribution, export_reports, run_benchmark
from .optimizer import SweepSettings, optimize_all_modes, write_optimization_csv
from .surrogates import MODEL_KINDS, ModelSpec, predict_with_flag
from .surrogates.persistence import load_models, save_models
from .dataspace import split_dataset

log = logging.getLogger("vmap")

DEFAULT_SEED = 20200817


def _write_manifest(target: Path, command: str, inputs: dict, outputs: list[str], seed: int,
                    extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "toolkit_version": __version__,
    }
    if extra:
        manifest.update(extra)
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def _build_specs(names: list[str], seed: int, scale: str = "raw") -> list[ModelSpec]:
    specs = []
    for name in names:
        kind = name.strip().upper()
        if kind not in MODEL_KINDS:
            raise VmapError(f"unknown method {name!r}; choose from {', '.join(MODEL_KINDS)}")
        hyper = {"seed": seed} if kind == "CGP" else {}
        specs.append(ModelSpec(kind, scale, hyper))
    return specs


def _group_for_fit(spec: ModelSpec, observations):
    groups: dict = {}
    for obs in observations:
        key = obs.config.io_mode if spec.kind == "CGP" else obs.key
        groups.setdefault(key, []).append(obs)
    return groups


def cmd_ingest(args) -> int:
    records = ingest_runs(args.runs)
    observations = compute_pvm(records)
    out = Path(args.out)
    write_observations(observations, out)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "ingest",
        {"runs": str(args.runs)},
        [str(out)],
        args.seed,
        {"n_records": len(records), "n_observations": len(observations)},
    )
    log.info("ingested %d runs into %d observations", len(records), len(observations))
    return 0


def cmd_fit(args) -> int:
    from .surrogates import fit

    observations = read_observations(args.observations)
    (spec,) = _build_specs([args.methods], args.seed, args.scale)
    groups = _group_for_fit(spec, observations)
    models = [fit(spec, group, response=args.response) for _, group in sorted(groups.items(), key=lambda kv: str(kv[0]))]
    out = Path(args.out)
    save_models(models, out)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "fit",
        {"observations": str(args.observations)},
        [str(out)],
        args.seed,
        {"method": spec.kind, "response": args.response, "scale": args.scale,
         "n_models": len(models)},
    )
    log.info("fitted %d %s models", len(models), spec.kind)
    return 0


def cmd_predict(args) -> int:
    models = load_models(args.models)
    by_key = {}
    for model in models:
        by_key[model.io_mode if model.io_mode is not None else model.key] = model

    out = Path(args.out)
    with open(args.queries, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RUNS_COLUMNS[:7]:
            raise VmapError(f"query file must have columns {', '.join(RUNS_COLUMNS[:7])}")
        rows = []
        for row in reader:
            config = SystemConfiguration(
                io_mode=row[0].strip(),
                io_scheduler=row[1].strip(),
                vm_io_scheduler=row[2].strip(),
                frequency=float(row[3]),
                threads=int(row[4]),
                file_size=int(row[5]),
                record_size=int(row[6]),
            )
            model = by_key.get(config.key) or by_key.get(config.io_mode)
            if model is None:
                raise VmapError(f"no fitted model for map {config.key}")
            value, fallback = predict_with_flag(model, encode_point(config), config.key)
            rows.append(list(row) + [format(value, ".12g"), int(fallback)])

    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(RUNS_COLUMNS[:7]) + ["prediction", "outside_weight_balls"])
        writer.writerows(rows)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "predict",
        {"models": str(args.models), "queries": str(args.queries)},
        [str(out)],
        args.seed,
        {"n_predictions": len(rows)},
    )
    return 0


def cmd_evaluate(args) -> int:
    observations = read_observations(args.observations)
    spec = SplitSpec.from_file(args.split_spec) if args.split_spec else default_split_spec()
    split = split_dataset(observations, spec)
    methods = _build_specs(args.methods.split(","), args.seed)
    reports = run_benchmark(methods, split, args.mode, jobs=args.jobs)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.csv"
    ratio_path = out_dir / "ratios.csv"
    export_reports(reports, report_path)
    export_ratio_distribution(reports, ratio_path)
    _write_manifest(
        out_dir / "manifest.json",
        "evaluate",
        {
            "observations": str(args.observations),
            "split_spec": str(args.split_spec) if args.split_spec else "<bundled default>",
        },
        [str(report_path), str(ratio_path)],
        args.seed,
        {"methods": args.methods, "mode": args.mode,
         "split_sizes": {
             "training": len(split.training),
             "interpolation_test": len(split.interpolation_test),
             "extrapolation_test": len(split.extrapolation_test),
         }},
    )
    for report in reports:
        log.info("%s %s: n=%d er1=%.4g er2=%.4g er3=%.4g", report.method, report.mode,
                 report.n, report.er1, report.er2, report.er3)
    return 0


def cmd_optimize(args) -> int:
    observations = read_observations(args.observations)
    settings = SweepSettings.from_file(args.config) if args.config else SweepSettings()
    (spec,) = _build_specs([args.methods], args.seed)
    results = optimize_all_modes(observations, model_spec=spec, settings=settings, jobs=args.jobs)
    out = Path(args.out)
    write_optimization_csv(results, out)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "optimize",
        {
            "observations": str(args.observations),
            "config": str(args.config) if args.config else "<defaults>",
        },
        [str(out)],
        args.seed,
        {"method": spec.kind, "n_modes": len(results),
         "infeasible_modes": [r.key.io_mode for r in results if not r.feasible]},
    )
    return 0


def cmd_export_plot_data(args) -> int:
    with open(args.ratios, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != ("method", "mode", "point_index", "ratio"):
            raise VmapError("ratio file must have columns method, mode, point_index, ratio")
        triples = [(row[0], row[1], float(row[3])) for row in reader if row]
    rows = boxplot_rows(triples)
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "mode", "n", "q1", "median", "q3",
                         "whisker_lo", "whisker_hi", "n_outliers"])
        for row in rows:
            writer.writerow(
                [row["method"], row["mode"], row["n"]]
                + [format(row[k], ".12g") for k in ("q1", "median", "q3", "whisker_lo", "whisker_hi")]
                + [row["n_outliers"]]
            )
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "export-plot-data",
        {"ratios": str(args.ratios)},
        [str(out)],
        args.seed,
        {"n_groups": len(rows)},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmap",
        description="Variability-map toolkit: ingest runs, fit surrogates, "
                    "benchmark predictions, optimize configurations.",
    )
    parser.add_argument("--version", action="version", version=f"vmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"seed recorded in manifests and used by randomized fits (default {DEFAULT_SEED})")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="parallel workers for per-map fitting (default: available cores)")

    p = sub.add_parser("ingest", help="condense replicated runs into observations")
    p.add_argument("--runs", required=True, help="runs CSV")
    p.add_argument("--out", required=True, help="output observations CSV")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit one surrogate per variability map")
    p.add_argument("--observations", required=True)
    p.add_argument("--methods", required=True, help="model kind (one of %s)" % ", ".join(MODEL_KINDS))
    p.add_argument("--scale", choices=["log", "raw"], default="raw")
    p.add_argument("--response", choices=["pvm", "mean_throughput"], default="pvm")
    p.add_argument("--out", required=True, help="output model bundle (JSON)")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at query configurations")
    p.add_argument("--models", required=True, help="model bundle from 'fit'")
    p.add_argument("--queries", required=True, help="CSV of configurations (7 columns)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="interpolation/extrapolation benchmark")
    p.add_argument("--observations", required=True)
    p.add_argument("--methods", required=True, help="comma-separated model kinds")
    p.add_argument("--mode", choices=["interpolation", "extrapolation"], required=True)
    p.add_argument("--split-spec", default=None, help="split specification file (default: bundled rules)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="per-mode constrained configuration sweep")
    p.add_argument("--observations", required=True)
    p.add_argument("--config", default=None, help="problem configuration file")
    p.add_argument("--methods", default="LSP", help="surrogate kind for both surfaces (default LSP)")
    p.add_argument("--out", required=True, help="output CSV")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("export-plot-data", help="box-plot geometry from a ratio file")
    p.add_argument("--ratios", required=True, help="ratios.csv from 'evaluate'")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_export_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("VMAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VmapError as exc:
        print(f"vmap {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
