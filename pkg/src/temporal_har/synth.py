"""Seeded synthetic daily routines written as labelled CASAS streams.

Randomness comes from numpy's PCG64 generator (``numpy.random.default_rng``)
seeded with ``[seed, day]`` for the schedule, ``[seed, day, activity]`` for
the firings of each instance and ``[seed, 2**31]`` for the Other noise,
so a spec always produces the same stream.

Spec JSON::

    {
      "sensors": ["M001", "M002"],
      "days": 30,
      "seed": 0,
      "start_date": "2024-01-01",
      "other_fraction": 0.1,
      "jitter_minutes": 10,
      "activities": [
        {"label": "Sleep", "start_hour": [23, 23.5], "duration_minutes": [420, 480],
         "sensors": ["M001"], "events_per_hour": 6}
      ]
    }

Each firing emits an ON event and, a few seconds later, an OFF event on
the same sensor. Gaps between activities receive Other-labelled firings so
that roughly ``other_fraction`` of all events are Other.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import OTHER, EventStream

_US_PER_MIN = 60_000_000
_MAX_SHIFT_MIN = 12 * 60


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ActivitySpec:
    label: str
    start_hour: tuple[float, float]
    duration_minutes: tuple[float, float]
    sensors: tuple[str, ...]
    events_per_hour: float = 30.0


@dataclass(frozen=True)
class RoutineSpec:
    sensors: tuple[str, ...]
    activities: tuple[ActivitySpec, ...]
    days: int = 30
    seed: int = 0
    start_date: str = "2024-01-01"
    other_fraction: float = 0.1
    jitter_minutes: float = 0.0

    def __post_init__(self):
        if len(set(self.sensors)) != len(self.sensors) or not self.sensors:
            raise SpecError("sensors must be a non-empty list of unique names")
        if self.days < 1:
            raise SpecError("days must be >= 1")
        if not 0 <= self.other_fraction < 1:
            raise SpecError("other_fraction must be in [0, 1)")
        if self.jitter_minutes < 0:
            raise SpecError("jitter_minutes must be >= 0")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise SpecError(f"start_date must be YYYY-MM-DD, got {self.start_date!r}") from None
        for a in self.activities:
            lo, hi = a.start_hour
            if not 0 <= lo <= hi < 24:
                raise SpecError(f"{a.label}: start_hour window must satisfy 0 <= lo <= hi < 24")
            dlo, dhi = a.duration_minutes
            if not 0 < dlo <= dhi:
                raise SpecError(f"{a.label}: duration range must be positive and ordered")
            if a.events_per_hour <= 0:
                raise SpecError(f"{a.label}: events_per_hour must be positive")
            missing = set(a.sensors) - set(self.sensors)
            if missing or not a.sensors:
                raise SpecError(f"{a.label}: unknown or empty sensor pool {sorted(missing)}")
        if sum(a.duration_minutes[0] for a in self.activities) >= 24 * 60:
            raise SpecError("activities cannot fit in one day even at minimum duration")

    @classmethod
    def from_dict(cls, obj: dict) -> "RoutineSpec":
        allowed = {"sensors", "activities", "days", "seed", "start_date", "other_fraction", "jitter_minutes"}
        unknown = set(obj) - allowed
        if unknown:
            raise SpecError(f"unknown routine spec key(s): {sorted(unknown)}")
        act_keys = {"label", "start_hour", "duration_minutes", "sensors", "events_per_hour"}
        acts = []
        try:
            for a in obj["activities"]:
                bad = set(a) - act_keys
                if bad:
                    raise SpecError(f"unknown activity key(s): {sorted(bad)}")
                acts.append(ActivitySpec(
                    label=str(a["label"]),
                    start_hour=_pair(a["start_hour"]),
                    duration_minutes=_pair(a["duration_minutes"]),
                    sensors=tuple(a["sensors"]),
                    events_per_hour=float(a.get("events_per_hour", 30.0)),
                ))
            rest = {k: obj[k] for k in allowed - {"sensors", "activities"} if k in obj}
            return cls(sensors=tuple(obj["sensors"]), activities=tuple(acts), **rest)
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed routine spec: {exc!r}") from None

    @classmethod
    def load(cls, path: str | Path) -> "RoutineSpec":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return {
            "sensors": list(self.sensors),
            "days": self.days,
            "seed": self.seed,
            "start_date": self.start_date,
            "other_fraction": self.other_fraction,
            "jitter_minutes": self.jitter_minutes,
            "activities": [
                {
                    "label": a.label,
                    "start_hour": list(a.start_hour),
                    "duration_minutes": list(a.duration_minutes),
                    "sensors": list(a.sensors),
                    "events_per_hour": a.events_per_hour,
                }
                for a in self.activities
            ],
        }


def _pair(v) -> tuple[float, float]:
    if isinstance(v, (int, float)):
        return (float(v), float(v))
    lo, hi = v
    return (float(lo), float(hi))


def _firings(rng, start_us: int, end_us: int, count: int, pool: np.ndarray):
    """ON/OFF pairs at sorted uniform times inside [start, end]."""
    on = np.sort(rng.integers(start_us, max(end_us, start_us + 1), size=count))
    off = np.minimum(on + rng.integers(1_000_000, 30_000_000, size=count), end_us)
    off = np.maximum(off, on)
    sensors = pool[rng.integers(0, len(pool), size=count)]
    times = np.empty(2 * count, dtype=np.int64)
    times[0::2], times[1::2] = on, off
    states = np.tile(np.array([1, -1], dtype=np.int8), count)
    return times, np.repeat(sensors, 2), states


def generate(spec: RoutineSpec) -> EventStream:
    index = {s: i for i, s in enumerate(spec.sensors)}
    origin = np.datetime64(spec.start_date, "us").astype(np.int64)

    # schedule activity instances day by day
    plan = []
    for day in range(spec.days):
        rng = np.random.default_rng([spec.seed, day])
        day0 = origin + day * 24 * 60 * _US_PER_MIN
        for order, a in enumerate(spec.activities):
            start_min = rng.uniform(*a.start_hour) * 60
            if spec.jitter_minutes:
                start_min += rng.normal(0.0, spec.jitter_minutes)
            duration = rng.uniform(*a.duration_minutes)
            plan.append([int(day0 + start_min * _US_PER_MIN), int(duration * _US_PER_MIN), order, day])
    plan.sort(key=lambda p: (p[0], p[2]))

    # push overlapping instances later; give up if the schedule cannot fit
    prev_end = None
    for p in plan:
        if prev_end is not None and p[0] <= prev_end:
            shift = prev_end + _US_PER_MIN - p[0]
            if shift > _MAX_SHIFT_MIN * _US_PER_MIN:
                label = spec.activities[p[2]].label
                raise SpecError(f"unsatisfiable routine: {label} on day {p[3]} overlaps by more than 12 h")
            p[0] += shift
        prev_end = p[0] + p[1]

    times, sensors, states, labels = [], [], [], []
    for start, duration, order, day in plan:
        a = spec.activities[order]
        rng = np.random.default_rng([spec.seed, day, order])
        count = max(1, int(rng.poisson(a.events_per_hour * duration / (60 * _US_PER_MIN))))
        pool = np.array([index[s] for s in a.sensors])
        t, s, st = _firings(rng, start, start + duration, count, pool)
        times.append(t), sensors.append(s), states.append(st), labels.append(np.full(len(t), a.label, dtype=object))

    n_act = sum(len(t) for t in times)
    n_noise_firings = int(round(n_act * spec.other_fraction / (1 - spec.other_fraction) / 2))
    if n_noise_firings:
        rng = np.random.default_rng([spec.seed, 2**31])
        span_end = origin + spec.days * 24 * 60 * _US_PER_MIN
        gaps, cursor = [], origin
        for start, duration, _, _ in plan:
            if start > cursor:
                gaps.append((cursor, start))
            cursor = max(cursor, start + duration)
        if span_end > cursor:
            gaps.append((cursor, span_end))
        lengths = np.array([b - a for a, b in gaps], dtype=float)
        picks = np.bincount(rng.choice(len(gaps), size=n_noise_firings, p=lengths / lengths.sum()), minlength=len(gaps))
        all_sensors = np.arange(len(spec.sensors))
        for (a, b), c in zip(gaps, picks):
            if c:
                # keep noise strictly inside the gap
                t, s, st = _firings(rng, a + 1, b - 1, int(c), all_sensors)
                times.append(t), sensors.append(s), states.append(st), labels.append(np.full(len(t), OTHER, dtype=object))

    if not times:
        return EventStream.from_events([], spec.sensors)
    t = np.concatenate(times)
    order = np.argsort(t, kind="stable")
    return EventStream(
        timestamps=t[order].astype("datetime64[us]"),
        sensors=np.concatenate(sensors)[order].astype(np.int32),
        states=np.concatenate(states)[order],
        labels=np.concatenate(labels)[order],
        sensor_registry=tuple(spec.sensors),
    )


def demo_spec(days: int = 30, seed: int = 7, other_fraction: float = 0.1) -> RoutineSpec:
    """Six-sensor flat where Cook (morning) and Wash_Dishes (evening) share
    the kitchen sensors and differ only by time of day."""
    return RoutineSpec.from_dict({
        "sensors": ["M001", "M002", "M003", "M004", "M005", "D001"],
        "days": days,
        "seed": seed,
        "start_date": "2024-01-01",
        "other_fraction": other_fraction,
        "jitter_minutes": 10,
        "activities": [
            {"label": "Personal_Hygiene", "start_hour": [6.5, 7.0], "duration_minutes": [15, 25],
             "sensors": ["M002", "M001"], "events_per_hour": 40},
            {"label": "Cook", "start_hour": [7.5, 8.0], "duration_minutes": [20, 30],
             "sensors": ["M003", "M004"], "events_per_hour": 50},
            {"label": "Eat", "start_hour": [8.5, 8.8], "duration_minutes": [15, 25],
             "sensors": ["M005", "M003"], "events_per_hour": 30},
            {"label": "Leave_Home", "start_hour": [9.5, 10.0], "duration_minutes": [2, 4],
             "sensors": ["D001", "M005"], "events_per_hour": 90},
            {"label": "Enter_Home", "start_hour": [16.0, 16.5], "duration_minutes": [2, 4],
             "sensors": ["D001", "M005"], "events_per_hour": 90},
            {"label": "Relax", "start_hour": [17.0, 17.5], "duration_minutes": [60, 90],
             "sensors": ["M005"], "events_per_hour": 12},
            {"label": "Wash_Dishes", "start_hour": [19.5, 20.0], "duration_minutes": [20, 30],
             "sensors": ["M003", "M004"], "events_per_hour": 50},
            {"label": "Sleep", "start_hour": [22.5, 23.0], "duration_minutes": [420, 450],
             "sensors": ["M001"], "events_per_hour": 4},
        ],
    })
