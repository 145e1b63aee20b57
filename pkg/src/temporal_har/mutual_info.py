"""Sensor-pair weighting matrices.

"Mutual information" here is the empirical probability that sensor ``j``
fires right after sensor ``i`` (normalised by the event count), not the
entropy-based quantity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import OTHER, EventStream
from .partition import DayPartition, Segment, segment_codes


@dataclass(frozen=True, eq=False)
class MIMatrix:
    values: np.ndarray
    source_event_count: int

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def to_json(self, labels: Sequence[str] | None = None) -> str:
        # json writes the shortest repr that round-trips each double exactly
        return json.dumps({
            "m": self.m,
            "labels": list(labels) if labels is not None else None,
            "source_event_count": self.source_event_count,
            "rows": self.values.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "MIMatrix":
        obj = json.loads(text)
        values = np.array(obj["rows"], dtype=float).reshape(obj["m"], obj["m"])
        return cls(values, int(obj.get("source_event_count", 0)))


@dataclass(frozen=True)
class TemporalMI:
    morning: MIMatrix
    afternoon: MIMatrix
    night: MIMatrix
    partition: DayPartition

    def __post_init__(self):
        if not self.morning.m == self.afternoon.m == self.night.m:
            raise ValueError("temporal matrices disagree on sensor count")

    def for_segment(self, seg: Segment | int) -> MIMatrix:
        if isinstance(seg, Segment):
            seg = list(Segment).index(seg)
        return (self.morning, self.afternoon, self.night)[seg]

    def stacked(self) -> np.ndarray:
        return np.stack([self.morning.values, self.afternoon.values, self.night.values])


def _check_sensors(sensors: np.ndarray, m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("sensor count must be >= 1")
    sensors = np.asarray(sensors, dtype=np.int64)
    if len(sensors) and (sensors.min() < 0 or sensors.max() >= m):
        raise ValueError(f"sensor index outside 0..{m - 1}")
    return sensors


def _sensor_array(events) -> np.ndarray:
    if isinstance(events, EventStream):
        return events.sensors
    if isinstance(events, np.ndarray):
        return events
    return np.array([e.sensor for e in events], dtype=np.int64)


def pair_counts(first: np.ndarray, second: np.ndarray, m: int) -> np.ndarray:
    counts = np.zeros((m, m), dtype=np.float64)
    np.add.at(counts, (first, second), 1.0)
    return counts


def mi_global(events, m: int) -> MIMatrix:
    """Consecutive-firing matrix over a whole sequence.

    ``events`` may be an :class:`EventStream`, a list of events, or an
    array of sensor indices.
    """
    sensors = _check_sensors(_sensor_array(events), m)
    n = len(sensors)
    if n <= 1:
        return MIMatrix(np.zeros((m, m)), n)
    return MIMatrix(pair_counts(sensors[:-1], sensors[1:], m) / n, n)


def mi_temporal(
    stream: EventStream,
    m: int,
    partition: DayPartition,
    adjacent_only: bool = False,
) -> TemporalMI:
    """One matrix per day segment, each event assigned by its own hour.

    By default each segment's events are taken as a subsequence (skipping
    the other segments) before pair counting. With ``adjacent_only`` only
    pairs adjacent in the original stream and both in the segment count;
    normalisation is by the segment's event count either way.
    """
    sensors = _check_sensors(stream.sensors, m)
    codes = segment_codes(stream.hours(), partition)
    mats = []
    for g in range(3):
        mask = codes == g
        if not adjacent_only:
            mats.append(mi_global(sensors[mask], m))
            continue
        n = int(mask.sum())
        both = mask[:-1] & mask[1:]
        values = pair_counts(sensors[:-1][both], sensors[1:][both], m) / n if n > 1 else np.zeros((m, m))
        mats.append(MIMatrix(values, n))
    return TemporalMI(*mats, partition=partition)


def mi_cooccurrence(windows, m: int) -> MIMatrix:
    """Fraction of windows in which both sensors occur.

    ``windows`` is a sequence of :class:`LabeledWindow` or a boolean
    presence matrix of shape ``(W, m)``.
    """
    if isinstance(windows, np.ndarray) and windows.dtype == bool:
        presence = windows
    else:
        windows = list(windows)
        presence = np.zeros((len(windows), m), dtype=bool)
        for r, w in enumerate(windows):
            presence[r, _check_sensors(w.sensors, m)] = True
    if not len(presence):
        raise ValueError("co-occurrence matrix needs at least one window")
    p = presence.astype(np.float64)
    return MIMatrix((p.T @ p) / len(presence), len(presence))


def mi_activity(train: EventStream, m: int) -> MIMatrix:
    """Consecutive pairs counted only inside non-Other activity runs,
    normalised by the number of events in those runs."""
    sensors = _check_sensors(train.sensors, m)
    labels = train.labels
    n_act = int(np.sum(labels != OTHER))
    if n_act == 0:
        return MIMatrix(np.zeros((m, m)), 0)
    same_run = (labels[:-1] == labels[1:]) & (labels[:-1] != OTHER)
    values = pair_counts(sensors[:-1][same_run], sensors[1:][same_run], m) / n_act
    return MIMatrix(values, n_act)
