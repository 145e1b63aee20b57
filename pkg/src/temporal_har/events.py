"""CASAS event logs: parsing, interval labelling, label aggregation and
chronological splitting.

A CASAS log has one sensor event per line::

    2010-11-04 00:03:50.209589 M003 ON Sleeping begin
    2010-11-04 00:03:52.415000 M003 OFF

The loaded stream is stored column-wise (numpy arrays) so that the
windowing and feature code can work on hundreds of thousands of events.
"""
from __future__ import annotations

import datetime as dt
import fnmatch
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

OTHER = "Other"

# Canonical order; also the label index used for tie-breaks.
CANONICAL_LABELS: tuple[str, ...] = (
    "Bathing",
    "Bed_to_Toilet",
    "Cook",
    "Eat",
    "Enter_Home",
    "Leave_Home",
    "Personal_Hygiene",
    "Relax",
    "Sleep",
    "Take_Medicine",
    "Wash_Dishes",
    "Work",
    OTHER,
)

_ON_VALUES = {"ON", "OPEN"}
_OFF_VALUES = {"OFF", "CLOSE"}


class State(IntEnum):
    ON = 1
    OFF = -1


def label_rank(label: str) -> tuple[int, str]:
    """Sort key: canonical index first, unknown labels after, by name."""
    try:
        return (CANONICAL_LABELS.index(label), "")
    except ValueError:
        return (len(CANONICAL_LABELS), label)


class ParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno
        self.line = line
        self.reason = reason


# ---------------------------------------------------------------------------
# label aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    """Raw dataset label -> canonical class.

    Exact entries win over patterns; patterns are tried in order. Canonical
    names always map to themselves so a serialised stream re-loads unchanged.
    """

    exact: dict[str, str] = field(default_factory=dict)
    patterns: tuple[tuple[str, str], ...] = ()

    def __call__(self, raw: str) -> str:
        if raw in self.exact:
            return self.exact[raw]
        for pattern, canonical in self.patterns:
            if fnmatch.fnmatchcase(raw, pattern):
                return canonical
        if raw in CANONICAL_LABELS:
            return raw
        return OTHER

    @classmethod
    def parse(cls, text: str) -> "LabelMap":
        exact: dict[str, str] = {}
        patterns: list[tuple[str, str]] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"label map line {lineno}: expected 'raw canonical', got {line!r}")
            raw, canonical = parts
            if any(c in raw for c in "*?["):
                patterns.append((raw, canonical))
            else:
                exact[raw] = canonical
        return cls(exact, tuple(patterns))

    @classmethod
    def load(cls, path: str | Path) -> "LabelMap":
        return cls.parse(Path(path).read_text())

    @classmethod
    def default(cls) -> "LabelMap":
        text = resources.files("temporal_har").joinpath("data/label_map.txt").read_text()
        return cls.parse(text)

    @classmethod
    def identity(cls) -> "LabelMap":
        """Keep raw labels verbatim (no aggregation)."""
        return _IdentityLabelMap()

    def to_text(self) -> str:
        lines = [f"{raw} {canon}" for raw, canon in self.exact.items()]
        lines += [f"{pat} {canon}" for pat, canon in self.patterns]
        return "\n".join(lines) + "\n"


class _IdentityLabelMap(LabelMap):
    def __call__(self, raw: str) -> str:
        return raw


# ---------------------------------------------------------------------------
# events and streams
# ---------------------------------------------------------------------------

class SensorRegistry:
    """Ordered, duplicate-free sensor names; new names get the next index."""

    def __init__(self, names: Iterable[str] = ()):
        self._index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._index.get(name)
        if idx is None:
            idx = self._index[name] = len(self._index)
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._index)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, name: object) -> bool:
        return name in self._index


@dataclass(frozen=True)
class SensorEvent:
    timestamp: dt.datetime
    sensor: int
    state: State
    label: str = OTHER


@dataclass(frozen=True)
class Annotation:
    activity: str
    marker: str  # "begin" | "end"


@dataclass(frozen=True)
class ParsedLine:
    timestamp: dt.datetime
    sensor: int
    state: State
    annotations: tuple[Annotation, ...] = ()


def _parse_timestamp(date: str, time: str) -> dt.datetime:
    if "." in time:
        hms, frac = time.split(".", 1)
        if not frac.isdigit():
            raise ValueError(f"bad fraction {frac!r}")
        # CASAS writes up to 6 fractional digits, sometimes fewer
        time = f"{hms}.{frac[:6].ljust(6, '0')}"
        return dt.datetime.strptime(f"{date} {time}", "%Y-%m-%d %H:%M:%S.%f")
    return dt.datetime.strptime(f"{date} {time}", "%Y-%m-%d %H:%M:%S")


def _parse_value(value: str) -> State:
    upper = value.upper()
    if upper in _ON_VALUES:
        return State.ON
    if upper in _OFF_VALUES:
        return State.OFF
    float(value)  # analog reading (temperature); raises on garbage
    return State.ON


def parse_casas_line(line: str, registry: SensorRegistry, lineno: int = 0) -> ParsedLine:
    """Decode one whitespace-delimited CASAS log line.

    Trailing tokens are read as ``Activity begin|end`` pairs. Unseen sensor
    names are added to ``registry``. Raises :class:`ParseError`.
    """
    fields = line.split()
    if len(fields) < 4:
        raise ParseError(lineno, line, "expected at least 4 fields")
    date, time, sensor, value, *rest = fields
    try:
        timestamp = _parse_timestamp(date, time)
    except ValueError as exc:
        raise ParseError(lineno, line, f"bad date/time ({exc})") from None
    try:
        state = _parse_value(value)
    except ValueError:
        raise ParseError(lineno, line, f"unrecognised sensor value {value!r}") from None
    if len(rest) % 2:
        raise ParseError(lineno, line, "dangling annotation token")
    annotations = []
    for activity, marker in zip(rest[::2], rest[1::2]):
        marker = marker.lower()
        if marker not in ("begin", "end"):
            raise ParseError(lineno, line, f"annotation marker must be begin/end, got {marker!r}")
        annotations.append(Annotation(activity, marker))
    return ParsedLine(timestamp, registry.add(sensor), state, tuple(annotations))


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered, labelled sensor events stored as parallel arrays.

    ``timestamps`` is ``datetime64[us]``, ``sensors`` are registry indices,
    ``states`` hold +1 (ON) / -1 (OFF), ``labels`` are canonical label strings.
    """

    timestamps: np.ndarray
    sensors: np.ndarray
    states: np.ndarray
    labels: np.ndarray
    sensor_registry: tuple[str, ...]
    label_map: LabelMap = field(default_factory=LabelMap)
    parse_errors: tuple[ParseError, ...] = ()

    def __post_init__(self):
        n = len(self.timestamps)
        if not (len(self.sensors) == len(self.states) == len(self.labels) == n):
            raise ValueError("event columns have different lengths")
        if len(set(self.sensor_registry)) != len(self.sensor_registry):
            raise ValueError("duplicate sensor names in registry")
        if n and (self.sensors.min() < 0 or self.sensors.max() >= len(self.sensor_registry)):
            raise ValueError("sensor index outside the registry")
        if n > 1 and np.any(self.timestamps[1:] < self.timestamps[:-1]):
            raise ValueError("events are not in chronological order")
        for arr in (self.timestamps, self.sensors, self.states, self.labels):
            arr.flags.writeable = False

    @classmethod
    def from_events(
        cls,
        events: Sequence[SensorEvent],
        sensor_registry: Sequence[str],
        label_map: LabelMap | None = None,
    ) -> "EventStream":
        return cls(
            timestamps=np.array([e.timestamp for e in events], dtype="datetime64[us]"),
            sensors=np.array([e.sensor for e in events], dtype=np.int32),
            states=np.array([int(e.state) for e in events], dtype=np.int8),
            labels=np.array([e.label for e in events], dtype=object),
            sensor_registry=tuple(sensor_registry),
            label_map=label_map or LabelMap(),
        )

    @property
    def m(self) -> int:
        return len(self.sensor_registry)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return self.slice(idx.start, idx.stop)
        return SensorEvent(
            self.timestamps[idx].item(),
            int(self.sensors[idx]),
            State(int(self.states[idx])),
            self.labels[idx],
        )

    def __iter__(self) -> Iterator[SensorEvent]:
        for i in range(len(self)):
            yield self[i]

    def slice(self, start: int | None, stop: int | None) -> "EventStream":
        s = slice(start, stop)
        return EventStream(
            self.timestamps[s].copy(),
            self.sensors[s].copy(),
            self.states[s].copy(),
            self.labels[s].copy(),
            self.sensor_registry,
            self.label_map,
        )

    def with_labels(self, labels: Sequence[str]) -> "EventStream":
        return EventStream(
            self.timestamps.copy(),
            self.sensors.copy(),
            self.states.copy(),
            np.array(list(labels), dtype=object),
            self.sensor_registry,
            self.label_map,
        )

    def hours(self) -> np.ndarray:
        """Fractional hour of day of every event."""
        us = (self.timestamps - self.timestamps.astype("datetime64[D]")).astype(np.int64)
        return us / 3_600_000_000.0

    def other_fraction(self) -> float:
        if not len(self):
            return 0.0
        return float(np.mean(self.labels == OTHER))

    def same_events(self, other: "EventStream") -> bool:
        return (
            self.sensor_registry == other.sensor_registry
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.sensors, other.sensors)
            and np.array_equal(self.states, other.states)
            and list(self.labels) == list(other.labels)
        )


def concat(streams: Sequence[EventStream]) -> EventStream:
    """Join chronologically adjacent streams sharing one sensor registry."""
    first = streams[0]
    for s in streams[1:]:
        if s.sensor_registry != first.sensor_registry:
            raise ValueError("streams use different sensor registries")
    return EventStream(
        np.concatenate([s.timestamps for s in streams]),
        np.concatenate([s.sensors for s in streams]),
        np.concatenate([s.states for s in streams]),
        np.concatenate([s.labels for s in streams]),
        first.sensor_registry,
        first.label_map,
    )


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _label_intervals(parsed: list[ParsedLine], label_map: LabelMap) -> list[str]:
    """Apply begin/end intervals; the innermost open activity wins."""
    labels = []
    open_stack: list[str] = []
    for p in parsed:
        closing = []
        for ann in p.annotations:
            if ann.marker == "begin":
                open_stack.append(ann.activity)
            elif ann.activity in open_stack:
                closing.append(ann.activity)
            else:
                log.warning("'%s end' without matching begin at %s; ignored", ann.activity, p.timestamp)
        # the annotated event itself belongs to the interval (inclusive)
        labels.append(label_map(open_stack[-1]) if open_stack else OTHER)
        for activity in closing:
            pos = len(open_stack) - 1 - open_stack[::-1].index(activity)
            del open_stack[pos]
    for activity in open_stack:
        log.warning("'%s begin' never ended; interval closed at end of file", activity)
    return labels


def parse_lines(
    lines: Iterable[str],
    label_map: LabelMap | None = None,
    registry: SensorRegistry | None = None,
) -> EventStream:
    label_map = label_map if label_map is not None else LabelMap.default()
    registry = registry if registry is not None else SensorRegistry()
    parsed: list[ParsedLine] = []
    errors: list[ParseError] = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            parsed.append(parse_casas_line(line, registry, lineno))
        except ParseError as exc:
            errors.append(exc)
    if errors:
        log.warning("%d malformed line(s) skipped", len(errors))

    times = [p.timestamp for p in parsed]
    if any(b < a for a, b in zip(times, times[1:])):
        log.warning("log lines out of chronological order; sorting by timestamp")
        order = sorted(range(len(parsed)), key=times.__getitem__)
        parsed = [parsed[i] for i in order]

    labels = _label_intervals(parsed, label_map)
    return EventStream(
        timestamps=np.array([p.timestamp for p in parsed], dtype="datetime64[us]"),
        sensors=np.array([p.sensor for p in parsed], dtype=np.int32),
        states=np.array([int(p.state) for p in parsed], dtype=np.int8),
        labels=np.array(labels, dtype=object),
        sensor_registry=registry.names,
        label_map=label_map,
        parse_errors=tuple(errors),
    )


def load_dataset(path: str | Path, label_map: LabelMap | None = None) -> EventStream:
    """Read a CASAS log file into a labelled :class:`EventStream`.

    Events between an activity's ``begin`` and ``end`` lines (inclusive) get
    the activity's canonical label, everything else is ``Other``. Malformed
    lines are skipped and collected in ``stream.parse_errors``.
    """
    with open(path, encoding="utf-8", errors="replace") as fh:
        stream = parse_lines(fh, label_map)
    log.info(
        "loaded %s: %d events, %d sensors, %.1f%% Other, %d parse errors",
        path, len(stream), stream.m, 100 * stream.other_fraction(), len(stream.parse_errors),
    )
    return stream


def first_days(stream: EventStream, days: float) -> EventStream:
    """Events within ``days`` days of the first event."""
    if not len(stream):
        return stream
    limit = stream.timestamps[0] + np.timedelta64(int(days * 86_400_000_000), "us")
    return stream.slice(0, int(np.searchsorted(stream.timestamps, limit, side="left")))


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def format_timestamp(ts: np.datetime64) -> tuple[str, str]:
    text = str(ts.astype("datetime64[us]"))
    date, time = text.split("T")
    if "." not in time:
        time += ".000000"
    return date, time


def iter_casas_lines(stream: EventStream) -> Iterator[str]:
    """Serialise a stream back to CASAS text with begin/end annotations."""
    labels = stream.labels
    n = len(stream)
    for i in range(n):
        date, time = format_timestamp(stream.timestamps[i])
        name = stream.sensor_registry[stream.sensors[i]]
        value = "ON" if stream.states[i] > 0 else "OFF"
        parts = [date, time, name, value]
        label = labels[i]
        if label != OTHER:
            if i == 0 or labels[i - 1] != label:
                parts += [label, "begin"]
            if i == n - 1 or labels[i + 1] != label:
                parts += [label, "end"]
        yield " ".join(parts)


def write_casas(stream: EventStream, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in iter_casas_lines(stream):
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"need three positive split ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    if n < 3:
        raise ValueError(f"cannot split {n} events into three non-empty parts")
    n_train = _round_half_up(ratios[0] * n)
    n_val = _round_half_up(ratios[1] * n)
    # keep every part non-empty on tiny streams
    n_train = min(max(n_train, 1), n - 2)
    n_val = min(max(n_val, 1), n - n_train - 1)
    return n_train, n_val, n - n_train - n_val


def temporal_split(
    stream: EventStream, ratios: Sequence[float] = (0.7, 0.15, 0.15)
) -> tuple[EventStream, EventStream, EventStream]:
    """Chronological train/validation/test split at event boundaries."""
    n_train, n_val, _ = split_sizes(len(stream), ratios)
    return (
        stream.slice(0, n_train),
        stream.slice(n_train, n_train + n_val),
        stream.slice(n_train + n_val, None),
    )
