"""Event-based sliding windows: one window per event, ending at that event.

Windows are not materialised as copies of events; a :class:`LabeledWindow`
is a view ``[start, end]`` into the stream and the feature code works on
index matrices built by :func:`window_index_matrix`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .events import EventStream, SensorEvent

DEFAULT_SIZE_GRID: tuple[int, ...] = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class LabeledWindow:
    stream: EventStream = field(repr=False)
    start: int
    end: int  # index of the trigger event (inclusive)

    @property
    def events(self) -> list[SensorEvent]:
        return [self.stream[i] for i in range(self.start, self.end + 1)]

    @property
    def sensors(self) -> np.ndarray:
        return self.stream.sensors[self.start:self.end + 1]

    @property
    def states(self) -> np.ndarray:
        return self.stream.states[self.start:self.end + 1]

    @property
    def timestamps(self) -> np.ndarray:
        return self.stream.timestamps[self.start:self.end + 1]

    @property
    def label(self) -> str:
        return self.stream.labels[self.end]

    @property
    def trigger_timestamp(self) -> np.datetime64:
        return self.stream.timestamps[self.end]

    def __len__(self) -> int:
        return self.end - self.start + 1

    def to_json(self) -> str:
        reg = self.stream.sensor_registry
        return json.dumps({
            "trigger": str(self.trigger_timestamp),
            "label": self.label,
            "events": [
                [str(t), reg[s], "ON" if st > 0 else "OFF"]
                for t, s, st in zip(self.timestamps, self.sensors, self.states)
            ],
        })


def event_windows(stream: EventStream, n: int, skip_truncated: bool = False) -> list[LabeledWindow]:
    """One window of the last ``n`` events per trigger event.

    Windows at the start of the stream hold fewer than ``n`` events unless
    ``skip_truncated`` is set.
    """
    if n < 1:
        raise ValueError("window size must be >= 1")
    first = n - 1 if skip_truncated else 0
    return [LabeledWindow(stream, max(0, k - n + 1), k) for k in range(first, len(stream))]


def window_starts(triggers: np.ndarray, sizes: np.ndarray | int, lower: int = 0) -> np.ndarray:
    """First index of each window, never before ``lower``."""
    return np.maximum(np.asarray(triggers) - np.asarray(sizes) + 1, lower)


def window_index_matrix(triggers: np.ndarray, sizes: np.ndarray | int, width: int, lower: int = 0) -> np.ndarray:
    """Row ``r`` lists the event indices of window ``r`` oldest first,
    right-aligned so the trigger sits in the last column; unused slots are -1.
    """
    triggers = np.asarray(triggers, dtype=np.int64)
    offsets = np.arange(width - 1, -1, -1, dtype=np.int64)
    idx = triggers[:, None] - offsets[None, :]
    starts = window_starts(triggers, sizes, lower)
    idx[idx < starts[:, None]] = -1
    return idx


def dump_windows(windows: Iterable[LabeledWindow], path) -> None:
    """JSON-lines debug dump, one window per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for w in windows:
            fh.write(w.to_json() + "\n")


# ---------------------------------------------------------------------------
# dynamic window size (DW)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DwModel:
    """Per-sensor histogram of activity run lengths, snapped to ``grid``.

    This is a run-length stand-in for the probabilistic window sizing of
    the cited DW method, not a reimplementation of it.
    """

    grid: tuple[int, ...]
    histograms: dict[int, np.ndarray]
    global_histogram: np.ndarray

    def window_size(self, sensor: int) -> int:
        return dw_window_size(self, sensor)

    def window_sizes(self, sensors: np.ndarray) -> np.ndarray:
        lookup = {s: dw_window_size(self, s) for s in np.unique(sensors).tolist()}
        return np.array([lookup[s] for s in sensors.tolist()], dtype=np.int64)


def run_lengths(labels: Sequence[str]) -> np.ndarray:
    """Length of the maximal same-label run containing each event."""
    labels = np.asarray(labels, dtype=object)
    n = len(labels)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    bounds = np.concatenate([[0], change, [n]])
    return np.repeat(np.diff(bounds), np.diff(bounds))


def snap_to_grid(values: np.ndarray, grid: Sequence[int]) -> np.ndarray:
    """Smallest grid size covering each value, capped at the largest."""
    g = np.asarray(grid)
    pos = np.searchsorted(g, values, side="left")
    return g[np.minimum(pos, len(g) - 1)]


def fit_dw(train: EventStream, grid: Sequence[int] = DEFAULT_SIZE_GRID) -> DwModel:
    grid = tuple(int(g) for g in grid)
    if not grid or list(grid) != sorted(set(grid)) or grid[0] < 1:
        raise ValueError(f"DW grid must be non-empty, ascending and positive: {grid}")
    if not len(train):
        raise ValueError("cannot fit DW on an empty stream")
    slots = np.searchsorted(grid, snap_to_grid(run_lengths(train.labels), grid))
    hist = np.zeros((train.m, len(grid)), dtype=np.int64)
    np.add.at(hist, (train.sensors, slots), 1)
    seen = np.unique(train.sensors).tolist()
    return DwModel(grid, {s: hist[s] for s in seen}, hist.sum(axis=0))


def dw_window_size(model: DwModel, sensor: int) -> int:
    """Grid size with the most mass for ``sensor`` (ties -> smaller size)."""
    hist = model.histograms.get(int(sensor), model.global_histogram)
    return model.grid[int(np.argmax(hist))]
