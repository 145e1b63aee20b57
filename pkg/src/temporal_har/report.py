"""Output files: report JSON, metrics / prediction / feature CSVs and a
confusion-matrix SVG. All writers are deterministic byte-for-byte."""
from __future__ import annotations

import csv
import json
from html import escape
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evaluation import EvalReport, ExperimentResult
from .events import CANONICAL_LABELS, format_timestamp, label_rank

METRICS_HEADER = ["dataset", "method", "status", "accuracy", "f1", "accuracy_no_other", "f1_no_other", "n", "k"]


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def metrics_row(dataset: str, result: ExperimentResult | None, method: str, error: str | None = None) -> list[str]:
    if result is None:
        return [dataset, method, f"failed: {error}", "", "", "", "", "", ""]
    no = result.report_no_other
    return [
        dataset, method, "ok",
        _fmt(result.report.accuracy), _fmt(result.report.weighted_f1),
        _fmt(no.accuracy if no else None), _fmt(no.weighted_f1 if no else None),
        str(result.grid.chosen_n), str(result.grid.chosen_k),
    ]


def write_metrics_csv(rows: Iterable[Sequence[str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        w.writerows(rows)


def write_predictions_csv(result: ExperimentResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trigger_timestamp", "true_label", "predicted_label"])
        for ts, t, p in zip(result.test_timestamps, result.y_true, result.y_pred):
            w.writerow([" ".join(format_timestamp(ts)), t, p])


def read_predictions_csv(path: str | Path) -> tuple[list[str], list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [r["true_label"] for r in rows], [r["predicted_label"] for r in rows]


def write_features_csv(
    x: np.ndarray,
    columns: Sequence[str],
    timestamps: np.ndarray,
    labels: Sequence[str],
    path: str | Path,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns) + ["trigger_timestamp", "label"])
        for row, ts, lab in zip(x, timestamps, labels):
            w.writerow([repr(float(v)) for v in row] + [" ".join(format_timestamp(ts)), lab])


def confusion_svg(report: EvalReport, title: str = "") -> str:
    """Row-normalised confusion heatmap, classes in canonical order."""
    labels = sorted(report.labels, key=label_rank)
    order = [report.labels.index(l) for l in labels]
    norm = report.confusion_normalized[np.ix_(order, order)]
    cell, left, top = 34, 150, 60
    size = len(labels)
    width, height = left + cell * size + 20, top + cell * size + 130

    def colour(v: float) -> str:
        shade = int(round(255 - 200 * v))
        return f"rgb({shade},{shade},255)"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{escape(title)}</text>',
    ]
    for i, lab in enumerate(labels):
        y = top + i * cell
        idx = CANONICAL_LABELS.index(lab) if lab in CANONICAL_LABELS else ""
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4}" text-anchor="end">{idx} {escape(lab)}</text>')
        x = left + i * cell + cell / 2
        out.append(
            f'<text x="{x}" y="{top + size * cell + 8}" text-anchor="end" '
            f'transform="rotate(-60 {x} {top + size * cell + 8})">{escape(lab)}</text>'
        )
        for j in range(size):
            v = float(norm[i, j])
            out.append(
                f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{colour(v)}" stroke="#ffffff"/>'
            )
            ink = "#ffffff" if v > 0.6 else "#000000"
            out.append(
                f'<text x="{left + j * cell + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" '
                f'fill="{ink}">{v:.2f}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_experiment(result: ExperimentResult, out_dir: str | Path, dataset: str = "dataset") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "metrics": out / "metrics.csv",
        "confusion": out / "confusion.svg",
        "predictions": out / "predictions.csv",
    }
    write_json({"dataset": dataset, **result.to_dict()}, paths["report"])
    write_metrics_csv([metrics_row(dataset, result, result.config.name)], paths["metrics"])
    paths["confusion"].write_text(confusion_svg(result.report, f"{dataset}: {result.config.name}"), encoding="utf-8")
    write_predictions_csv(result, paths["predictions"])
    return paths
