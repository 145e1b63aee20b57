"""Metrics, validation grid search and the end-to-end experiment protocol.

Protocol: chronological train/validation/test split; for every window size
``N`` the weighting models are fitted on train only, KNN is scored on the
validation windows for every ``k``; the best ``(N, k)`` is refitted on
train+validation and evaluated once on test, with and without ``Other``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import knn
from .events import OTHER, EventStream, concat, label_rank, temporal_split
from .features import FeatureConfig, ModelOptions, Models, feature_matrix, fit_models
from .windowing import DEFAULT_SIZE_GRID

log = logging.getLogger(__name__)

DEFAULT_K_GRID: tuple[int, ...] = (1, 3, 5, 7, 9, 11, 15, 21, 25)
DEFAULT_N_GRID: tuple[int, ...] = DEFAULT_SIZE_GRID
DEFAULT_RATIOS: tuple[float, float, float] = (0.7, 0.15, 0.15)
METRICS = ("accuracy", "weighted_f1")


@dataclass(frozen=True)
class ClassScore:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    weighted_f1: float
    per_class: tuple[ClassScore, ...]
    labels: tuple[str, ...]
    confusion: np.ndarray
    excluded_label: str | None = None
    warnings: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def confusion_normalized(self) -> np.ndarray:
        rows = self.confusion.sum(axis=1, keepdims=True).astype(float)
        return np.divide(self.confusion, rows, out=np.zeros(self.confusion.shape), where=rows > 0)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "excluded_label": self.excluded_label,
            "n": self.n,
            "labels": list(self.labels),
            "per_class": [vars(c) for c in self.per_class],
            "confusion": self.confusion.tolist(),
            "confusion_normalized": self.confusion_normalized.tolist(),
            "warnings": list(self.warnings),
        }


def metrics(
    true_labels: Sequence[str],
    predicted_labels: Sequence[str],
    exclude: str | None = None,
) -> EvalReport:
    """Accuracy, support-weighted F1 and the confusion matrix.

    With ``exclude`` set, pairs whose *true* label is ``exclude`` are dropped;
    predictions of ``exclude`` on the remaining pairs still count as errors.
    """
    y = np.asarray(true_labels, dtype=object)
    p = np.asarray(predicted_labels, dtype=object)
    if len(y) != len(p):
        raise ValueError(f"{len(y)} true labels but {len(p)} predictions")
    if exclude is not None:
        keep = y != exclude
        y, p = y[keep], p[keep]
    if len(y) == 0:
        raise ValueError("no label pairs left to evaluate")

    labels = tuple(sorted(set(y.tolist()) | set(p.tolist()), key=label_rank))
    pos = {lab: i for i, lab in enumerate(labels)}
    conf = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(conf, ([pos[v] for v in y], [pos[v] for v in p]), 1)

    tp = np.diag(conf).astype(float)
    support = conf.sum(axis=1)
    predicted = conf.sum(axis=0)
    warnings = []
    scores = []
    for i, lab in enumerate(labels):
        prec = tp[i] / predicted[i] if predicted[i] else 0.0
        rec = tp[i] / support[i] if support[i] else 0.0
        if not predicted[i] and support[i]:
            warnings.append(f"precision of {lab} undefined (never predicted); set to 0")
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        scores.append(ClassScore(lab, float(prec), float(rec), float(f1), int(support[i])))

    weighted = sum(s.f1 * s.support for s in scores if s.support) / support.sum()
    return EvalReport(
        accuracy=float(tp.sum() / len(y)),
        weighted_f1=float(weighted),
        per_class=tuple(scores),
        labels=labels,
        confusion=conf,
        excluded_label=exclude,
        warnings=tuple(warnings),
    )


def score(report: EvalReport, metric: str) -> float:
    if metric not in METRICS:
        raise ValueError(f"selection metric must be one of {METRICS}")
    return getattr(report, metric)


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineOptions:
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    metric: str = "accuracy"
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    skip_truncated: bool = False
    models: ModelOptions = field(default_factory=ModelOptions)


@dataclass(frozen=True)
class GridEntry:
    n: int
    k: int
    score: float | None
    status: str = "ok"


@dataclass(frozen=True)
class GridResult:
    entries: tuple[GridEntry, ...]
    chosen_n: int
    chosen_k: int
    metric: str

    @property
    def best_score(self) -> float:
        return next(e.score for e in self.entries if (e.n, e.k) == (self.chosen_n, self.chosen_k))

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "chosen": {"n": self.chosen_n, "k": self.chosen_k, "score": self.best_score},
            "trace": [vars(e) for e in self.entries],
        }


def _train_triggers(stream: EventStream, n: int, skip_truncated: bool) -> np.ndarray:
    return np.arange(n - 1 if skip_truncated else 0, len(stream))


def _fit_and_featurize(train, cfg, n, opts: PipelineOptions):
    models = fit_models(train, cfg, n, opts.models)
    triggers = _train_triggers(train, n, opts.skip_truncated)
    return models, feature_matrix(train, cfg, models, n, triggers=triggers), train.labels[triggers]


def _continuation_features(context: EventStream, start: int, cfg, models: Models, n: int) -> np.ndarray:
    """Features for triggers ``start..`` of ``context``; windows may reach
    back into earlier events (sensor readings only, no labels)."""
    return feature_matrix(context, cfg, models, n, triggers=np.arange(start, len(context)))


def grid_search(
    train: EventStream,
    val: EventStream,
    cfg: FeatureConfig,
    opts: PipelineOptions = PipelineOptions(),
) -> GridResult:
    if not opts.k_grid or not opts.n_grid:
        raise ValueError("k and window-size grids must be non-empty")
    context = concat([train, val])
    y_val = val.labels
    entries: list[GridEntry] = []
    for n in sorted(set(opts.n_grid)):
        try:
            models, x_train, y_train = _fit_and_featurize(train, cfg, n, opts)
            x_val = _continuation_features(context, len(train), cfg, models, n)
        except ValueError as exc:
            log.warning("N=%d failed: %s", n, exc)
            entries += [GridEntry(n, k, None, f"failed: {exc}") for k in sorted(set(opts.k_grid))]
            continue
        ks = sorted(set(opts.k_grid))
        usable = [k for k in ks if 1 <= k <= len(x_train)]
        idx = dist = None
        if usable:
            model = knn.fit(x_train, y_train, max(usable))
            idx, dist = knn.neighbours(model, x_val)
        for k in ks:
            if k not in usable:
                entries.append(GridEntry(n, k, None, f"failed: k={k} exceeds {len(x_train)} training windows"))
                continue
            pred = [knn.vote(y_train[i[:k]], d[:k]) for i, d in zip(idx, dist)]
            entries.append(GridEntry(n, k, score(metrics(y_val, pred), opts.metric)))
    ok = [e for e in entries if e.score is not None]
    if not ok:
        raise RuntimeError("every grid configuration failed")
    best = max(ok, key=lambda e: (e.score, -e.n, -e.k))
    return GridResult(tuple(entries), best.n, best.k, opts.metric)


# ---------------------------------------------------------------------------
# full experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    config: FeatureConfig
    report: EvalReport
    report_no_other: EvalReport | None
    grid: GridResult
    models: Models
    test_timestamps: np.ndarray
    y_true: np.ndarray
    y_pred: np.ndarray
    split_sizes: tuple[int, int, int]

    def to_dict(self) -> dict:
        partition = self.models.partition
        return {
            "method": self.config.name,
            "feature_config": {
                "base": self.config.base,
                "cyclic": self.config.cyclic,
                "location_change": self.config.location_change,
                "swtw_lambda": self.config.swtw_lambda,
                "scaling": self.config.scaling,
            },
            "split_sizes": list(self.split_sizes),
            "hyperparameters": {"n": self.grid.chosen_n, "k": self.grid.chosen_k},
            "partition": partition.to_dict() if partition else None,
            "with_other": self.report.to_dict(),
            "without_other": self.report_no_other.to_dict() if self.report_no_other else None,
            "grid": self.grid.to_dict(),
        }


def evaluate_predictions(y_true, y_pred) -> tuple[EvalReport, EvalReport | None]:
    """Both reports from one set of predictions; no refitting involved."""
    full = metrics(y_true, y_pred)
    try:
        no_other = metrics(y_true, y_pred, exclude=OTHER)
    except ValueError:
        log.warning("test split has only Other events; no Other-free report")
        no_other = None
    return full, no_other


def run_experiment(
    dataset: EventStream,
    cfg: FeatureConfig,
    opts: PipelineOptions = PipelineOptions(),
) -> ExperimentResult:
    train, val, test = temporal_split(dataset, opts.ratios)
    grid = grid_search(train, val, cfg, opts)
    n, k = grid.chosen_n, grid.chosen_k

    trainval = concat([train, val])
    models, x_fit, y_fit = _fit_and_featurize(trainval, cfg, n, opts)
    model = knn.fit(x_fit, y_fit, min(k, len(x_fit)))
    x_test = _continuation_features(dataset, len(trainval), cfg, models, n)
    y_pred = knn.predict_many(model, x_test)
    full, no_other = evaluate_predictions(test.labels, y_pred)
    return ExperimentResult(
        config=cfg,
        report=full,
        report_no_other=no_other,
        grid=grid,
        models=models,
        test_timestamps=test.timestamps,
        y_true=np.asarray(test.labels),
        y_pred=y_pred,
        split_sizes=(len(train), len(val), len(test)),
    )
