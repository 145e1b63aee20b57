"""Command-line entry point: ``temporal-har {run,compare,synth,partition,features}``.

Experiments are described by a YAML (or JSON) config file; command-line
flags override individual keys. Exit codes: 0 success, 1 runtime failure,
2 usage or config error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from . import evaluation, report
from .events import LabelMap, first_days, load_dataset, temporal_split, write_casas
from .features import (
    DEFAULT_SWTW_LAMBDA,
    ConfigError,
    FeatureConfig,
    ModelOptions,
    column_names,
    feature_matrix,
    fit_models,
)
from .partition import DEFAULT_HOUR_GRID, activity_descriptors, optimize_partition
from .synth import RoutineSpec, SpecError, generate
from .windowing import DEFAULT_SIZE_GRID

log = logging.getLogger("temporal_har")

# key -> help text; the order here is the order shown in --help
CONFIG_KEYS: dict[str, str] = {
    "dataset": "path to a CASAS log file (required)",
    "dataset_name": "name used in reports and CSV rows (default: file stem)",
    "label_map": "raw->canonical label table; default: bundled table",
    "max_days": "keep only the first N days of the log (Aruba: 90)",
    "output_dir": "where reports are written (default: out)",
    "method": "feature method for `run`, e.g. SWMI, SWMI+cyclic+location, Combined",
    "methods": "list of methods for `compare`, in output row order",
    "k_grid": "KNN k values for grid search",
    "n_grid": "window sizes (events) for grid search; DW caps its own grid at N",
    "ratios": "train/validation/test fractions (chronological)",
    "metric": "validation selection metric: accuracy | weighted_f1",
    "scaling": "feature scaling: none | minmax (fitted on training windows)",
    "swtw_half_life_s": "SWTW decay half-life in seconds (default 60)",
    "skip_truncated": "drop training windows shorter than N at the stream start",
    "partition_grid": "candidate day-partition hours (default 0..23)",
    "include_other": "let Other runs contribute partition descriptors",
    "standardize": "standardise start hour and event count before cohesion",
    "temporal_adjacent_only": "temporal MI counts only pairs adjacent in the original stream",
    "dw_grid": "candidate DW window sizes",
}


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    dataset_name: str | None = None
    label_map: str | None = None
    max_days: float | None = None
    output_dir: str = "out"
    method: str = "SWMI"
    methods: list[str] = field(default_factory=lambda: ["SWMI"])
    k_grid: list[int] = field(default_factory=lambda: list(evaluation.DEFAULT_K_GRID))
    n_grid: list[int] = field(default_factory=lambda: list(evaluation.DEFAULT_N_GRID))
    ratios: list[float] = field(default_factory=lambda: list(evaluation.DEFAULT_RATIOS))
    metric: str = "accuracy"
    scaling: str = "none"
    swtw_half_life_s: float = 60.0
    skip_truncated: bool = False
    partition_grid: list[float] = field(default_factory=lambda: list(DEFAULT_HOUR_GRID))
    include_other: bool = False
    standardize: bool = True
    temporal_adjacent_only: bool = False
    dw_grid: list[int] = field(default_factory=lambda: list(DEFAULT_SIZE_GRID))

    @classmethod
    def from_mapping(cls, obj: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a mapping of keys to values")
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg = cls(**obj)
        try:
            cfg.validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            obj = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        return cls.from_mapping(obj)

    def validate(self) -> None:
        if self.metric not in evaluation.METRICS:
            raise ConfigError(f"metric must be one of {evaluation.METRICS}")
        if self.scaling not in ("none", "minmax"):
            raise ConfigError("scaling must be none or minmax")
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1) > 1e-9 or min(self.ratios) <= 0:
            raise ConfigError("ratios must be three positive fractions summing to 1")
        if not self.k_grid or min(self.k_grid) < 1:
            raise ConfigError("k_grid must hold positive integers")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ConfigError("n_grid must hold positive integers")
        if self.swtw_half_life_s < 0:
            raise ConfigError("swtw_half_life_s must be >= 0")
        for m in [self.method, *self.methods]:
            self.feature_config(m)

    def feature_config(self, method: str | None = None) -> FeatureConfig:
        lam = DEFAULT_SWTW_LAMBDA * 60.0 / self.swtw_half_life_s if self.swtw_half_life_s else 0.0
        return FeatureConfig.parse(method or self.method, swtw_lambda=lam, scaling=self.scaling)

    def pipeline_options(self) -> evaluation.PipelineOptions:
        return evaluation.PipelineOptions(
            k_grid=tuple(int(k) for k in self.k_grid),
            n_grid=tuple(int(n) for n in self.n_grid),
            metric=self.metric,
            ratios=tuple(float(r) for r in self.ratios),
            skip_truncated=bool(self.skip_truncated),
            models=ModelOptions(
                partition_grid=tuple(float(h) for h in self.partition_grid),
                include_other=bool(self.include_other),
                standardize=bool(self.standardize),
                temporal_adjacent_only=bool(self.temporal_adjacent_only),
                dw_grid=tuple(int(g) for g in self.dw_grid),
            ),
        )

    @property
    def name(self) -> str:
        return self.dataset_name or (Path(self.dataset).stem if self.dataset else "dataset")


class PipelineError(RuntimeError):
    pass


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="YAML/JSON experiment config")
    p.add_argument("--dataset", help=CONFIG_KEYS["dataset"])
    p.add_argument("--dataset-name", help=CONFIG_KEYS["dataset_name"])
    p.add_argument("--label-map", help=CONFIG_KEYS["label_map"])
    p.add_argument("--max-days", type=float, help=CONFIG_KEYS["max_days"])
    p.add_argument("-o", "--output-dir", help=CONFIG_KEYS["output_dir"])
    p.add_argument("--k-grid", type=_int_list, help="comma-separated; " + CONFIG_KEYS["k_grid"])
    p.add_argument("--n-grid", type=_int_list, help="comma-separated; " + CONFIG_KEYS["n_grid"])
    p.add_argument("--ratios", type=_float_list, help="comma-separated; " + CONFIG_KEYS["ratios"])
    p.add_argument("--metric", help=CONFIG_KEYS["metric"])
    p.add_argument("--scaling", help=CONFIG_KEYS["scaling"])


def _config_epilog() -> str:
    lines = ["config keys (YAML):"]
    lines += [f"  {k:<24} {v}" for k, v in CONFIG_KEYS.items()]
    return "\n".join(lines)


def _resolve_config(args) -> ExperimentConfig:
    base: dict[str, Any] = {}
    if args.config:
        base = vars(ExperimentConfig.load(args.config))
    overrides = {
        "dataset": args.dataset,
        "dataset_name": args.dataset_name,
        "label_map": args.label_map,
        "max_days": args.max_days,
        "output_dir": args.output_dir,
        "k_grid": args.k_grid,
        "n_grid": args.n_grid,
        "ratios": args.ratios,
        "metric": args.metric,
        "scaling": args.scaling,
        "method": getattr(args, "method", None),
        "methods": getattr(args, "methods", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig.from_mapping(base)
    if not cfg.dataset:
        raise ConfigError("no dataset given (config key 'dataset' or --dataset)")
    return cfg


def _load(cfg: ExperimentConfig):
    path = Path(cfg.dataset)
    if not path.is_file():
        raise PipelineError(f"dataset not found: {path}")
    label_map = LabelMap.load(cfg.label_map) if cfg.label_map else LabelMap.default()
    stream = load_dataset(path, label_map)
    if stream.parse_errors:
        log.warning("%s: %d unparseable line(s) skipped", path, len(stream.parse_errors))
    if cfg.max_days:
        stream = first_days(stream, cfg.max_days)
    log.info("%d events, %.1f%% Other", len(stream), 100 * stream.other_fraction())
    return stream


def _summary(name: str, method: str, result: evaluation.ExperimentResult) -> str:
    no = result.report_no_other
    tail = f" | no-Other Acc. {no.accuracy:.3f} F1 {no.weighted_f1:.3f}" if no else ""
    return (
        f"{name} {method}: Acc. {result.report.accuracy:.3f} F1 {result.report.weighted_f1:.3f}{tail} "
        f"(N={result.grid.chosen_n}, k={result.grid.chosen_k})"
    )


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    stream = _load(cfg)
    fcfg = cfg.feature_config()
    result = evaluation.run_experiment(stream, fcfg, cfg.pipeline_options())
    paths = report.write_experiment(result, cfg.output_dir, cfg.name)
    print(_summary(cfg.name, fcfg.name, result))
    for kind, path in paths.items():
        log.info("wrote %s: %s", kind, path)
    return 0


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.methods:
        raise ConfigError("compare needs at least one method in 'methods'")
    stream = _load(cfg)
    opts = cfg.pipeline_options()
    rows, ok = [], 0
    for method in cfg.methods:
        fcfg = cfg.feature_config(method)
        try:
            result = evaluation.run_experiment(stream, fcfg, opts)
        except (ValueError, RuntimeError) as exc:
            log.error("%s failed: %s", method, exc)
            rows.append(report.metrics_row(cfg.name, None, method, str(exc)))
            continue
        ok += 1
        rows.append(report.metrics_row(cfg.name, result, method))
        print(_summary(cfg.name, method, result))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_metrics_csv(rows, out / "compare.csv")
    return 0 if ok else 1


def cmd_synth(args) -> int:
    spec = RoutineSpec.load(args.spec)
    stream = generate(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_casas(stream, args.out)
    print(f"wrote {len(stream)} events to {args.out}")
    return 0


def cmd_partition(args) -> int:
    cfg = _resolve_config(args)
    stream = _load(cfg)
    train, _, _ = temporal_split(stream, cfg.ratios)
    opts = cfg.pipeline_options().models
    desc = activity_descriptors(train, opts.include_other, opts.standardize)
    p = optimize_partition(desc, opts.partition_grid)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json({"dataset": cfg.name, "descriptors": len(desc), **p.to_dict()}, out / "partition.json")
    print(f"mu={p.mu:g} alpha={p.alpha:g} nu={p.nu:g}")
    return 0


def cmd_features(args) -> int:
    cfg = _resolve_config(args)
    stream = _load(cfg)
    fcfg = cfg.feature_config()
    n = args.window or cfg.n_grid[0]
    train, _, _ = temporal_split(stream, cfg.ratios)
    models = fit_models(train, fcfg, n, cfg.pipeline_options().models)
    x = feature_matrix(stream, fcfg, models, n)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "features.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_features_csv(x, column_names(fcfg, stream.sensor_registry), stream.timestamps, stream.labels, out)
    print(f"wrote {len(x)} x {x.shape[1]} features to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temporal-har",
        description="Streaming activity recognition on CASAS smart-home logs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("run", help="grid-search, retrain and evaluate one method",
                       epilog=_config_epilog(), formatter_class=fmt)
    _add_experiment_args(p)
    p.add_argument("-m", "--method", help=CONFIG_KEYS["method"])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several methods on shared splits, write compare.csv",
                       epilog=_config_epilog(), formatter_class=fmt)
    _add_experiment_args(p)
    p.add_argument("-m", "--methods", nargs="+", help=CONFIG_KEYS["methods"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic CASAS log from a JSON routine spec",
                       epilog="routine spec keys: sensors, days, seed, start_date, other_fraction, "
                              "jitter_minutes, activities[label, start_hour, duration_minutes, "
                              "sensors, events_per_hour]")
    p.add_argument("spec", help="routine spec JSON")
    p.add_argument("out", help="output CASAS text file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("partition", help="learn and dump the morning/afternoon/night thresholds",
                       epilog=_config_epilog(), formatter_class=fmt)
    _add_experiment_args(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("features", help="dump per-event feature vectors as CSV",
                       epilog=_config_epilog(), formatter_class=fmt)
    _add_experiment_args(p)
    p.add_argument("-m", "--method", help=CONFIG_KEYS["method"])
    p.add_argument("--window", type=int, help="window size N (default: first of n_grid)")
    p.add_argument("--out", help="CSV path (default: OUTPUT_DIR/features.csv)")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
