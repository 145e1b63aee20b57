"""Per-window feature vectors.

Every representation is computed by :func:`feature_matrix`, which handles a
batch of trigger events at once using a right-aligned window index matrix.
The per-window helpers (``count_vector``, ``swmi_vector`` ...) are thin
wrappers around it so both entry points share one code path.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .events import EventStream
from .mutual_info import MIMatrix, TemporalMI, mi_activity, mi_cooccurrence, mi_global, mi_temporal
from .partition import DEFAULT_HOUR_GRID, DayPartition, activity_descriptors, optimize_partition, segment_codes
from .windowing import DEFAULT_SIZE_GRID, DwModel, LabeledWindow, fit_dw, window_index_matrix

BASE_METHODS = ("SW", "SWMI", "SWMI-Temp", "SWMIex", "SWMI-Act", "BSS", "SWLS", "SWTW", "DW")

_BASE_ALIASES = {b.upper().replace("-", "").replace(" ", "").replace("_", ""): b for b in BASE_METHODS}
_BASE_ALIASES["SWMITEMPORAL"] = "SWMI-Temp"

DEFAULT_SWTW_LAMBDA = math.log(2) / 60.0  # 60 s half-life
CYCLIC_NAMES = ("hour_sin", "hour_cos", "dow_sin", "dow_cos")
_CHUNK = 20_000


class ConfigError(ValueError):
    """A feature configuration cannot be built with the given models."""


@dataclass(frozen=True)
class FeatureConfig:
    base: str = "SWMI"
    cyclic: bool = False
    location_change: bool = False
    swtw_lambda: float = DEFAULT_SWTW_LAMBDA
    scaling: str = "none"  # "none" | "minmax"

    def __post_init__(self):
        if self.base not in BASE_METHODS:
            raise ConfigError(f"unknown base method {self.base!r}; choose from {BASE_METHODS}")
        if self.scaling not in ("none", "minmax"):
            raise ConfigError(f"scaling must be 'none' or 'minmax', got {self.scaling!r}")
        if self.swtw_lambda < 0:
            raise ConfigError("swtw_lambda must be >= 0")

    @property
    def name(self) -> str:
        parts = [self.base]
        if self.cyclic:
            parts.append("cyclic")
        if self.location_change:
            parts.append("location")
        return "+".join(parts)

    @classmethod
    def parse(cls, method: str, **kwargs) -> "FeatureConfig":
        """Build from names like ``"SWMI+cyclic+location"`` or ``"Combined"``."""
        tokens = [t.strip() for t in method.split("+") if t.strip()]
        if not tokens:
            raise ConfigError("empty method name")
        head = tokens[0].upper().replace("-", "").replace(" ", "").replace("_", "")
        extras = {t.lower() for t in tokens[1:]}
        if head == "COMBINED":
            base = "SWMI-Temp"
            extras |= {"cyclic", "location"}
        elif head in _BASE_ALIASES:
            base = _BASE_ALIASES[head]
        else:
            raise ConfigError(f"unknown base method {tokens[0]!r}")
        unknown = extras - {"cyclic", "location"}
        if unknown:
            raise ConfigError(f"unknown feature add-on(s) {sorted(unknown)}")
        return cls(base=base, cyclic="cyclic" in extras, location_change="location" in extras, **kwargs)


@dataclass(frozen=True)
class MinMaxScaler:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "MinMaxScaler":
        return cls(x.min(axis=0), x.max(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - self.lo) / safe, 0.0)


@dataclass(frozen=True)
class ModelOptions:
    """Knobs for fitting the weighting models (all have ledger defaults)."""

    partition_grid: tuple[float, ...] = DEFAULT_HOUR_GRID
    include_other: bool = False
    standardize: bool = True
    temporal_adjacent_only: bool = False
    dw_grid: tuple[int, ...] = DEFAULT_SIZE_GRID


@dataclass(frozen=True)
class Models:
    mi: MIMatrix | None = None
    tmi: TemporalMI | None = None
    partition: DayPartition | None = None
    dw: DwModel | None = None
    scaler: MinMaxScaler | None = None


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple[tuple[str, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.values)


def layout_for(cfg: FeatureConfig, m: int) -> tuple[tuple[str, int], ...]:
    blocks = [(cfg.base, m)]
    if cfg.cyclic:
        blocks.append(("cyclic", 4))
    if cfg.location_change:
        blocks.append(("location_change", 1))
    return tuple(blocks)


def column_names(cfg: FeatureConfig, sensor_registry: Sequence[str]) -> list[str]:
    cols = [f"{cfg.base}:{s}" for s in sensor_registry]
    if cfg.cyclic:
        cols += list(CYCLIC_NAMES)
    if cfg.location_change:
        cols.append("location_change")
    return cols


# ---------------------------------------------------------------------------
# time helpers
# ---------------------------------------------------------------------------

def _as_datetime64(ts) -> np.ndarray:
    return np.asarray(ts, dtype="datetime64[us]")


def fractional_hours(ts) -> np.ndarray:
    t = _as_datetime64(ts)
    return (t - t.astype("datetime64[D]")).astype(np.int64) / 3_600_000_000.0


def day_of_week(ts) -> np.ndarray:
    """Monday = 0 (1970-01-01 was a Thursday)."""
    days = _as_datetime64(ts).astype("datetime64[D]").astype(np.int64)
    return (days + 3) % 7


def cyclic_matrix(ts) -> np.ndarray:
    h = fractional_hours(ts)
    d = day_of_week(ts)
    return np.column_stack([
        np.sin(2 * np.pi * h / 24), np.cos(2 * np.pi * h / 24),
        np.sin(2 * np.pi * d / 7), np.cos(2 * np.pi * d / 7),
    ])


def cyclic_features(ts: dt.datetime | np.datetime64) -> np.ndarray:
    """(sin_h, cos_h, sin_d, cos_d) for one timestamp; fractional hours."""
    return cyclic_matrix(np.atleast_1d(_as_datetime64(ts)))[0]


# ---------------------------------------------------------------------------
# batch extraction
# ---------------------------------------------------------------------------

def _weighted_counts(rows: np.ndarray, sensors: np.ndarray, weights: np.ndarray | None, t: int, m: int) -> np.ndarray:
    flat = rows * m + sensors
    return np.bincount(flat, weights=weights, minlength=t * m).reshape(t, m).astype(np.float64)


def _base_block(stream, idx, triggers, cfg: FeatureConfig, models: Models) -> np.ndarray:
    m = stream.m
    t = len(triggers)
    valid = idx >= 0
    safe = np.where(valid, idx, 0)
    sens = stream.sensors[safe]
    rows = np.broadcast_to(np.arange(t)[:, None], idx.shape)

    if cfg.base in ("BSS", "SWLS"):
        out = np.zeros((t, m))
        states = stream.states[safe].astype(np.float64)
        all_rows = np.arange(t)
        # oldest column first so the newest state of each sensor is written last
        for c in range(idx.shape[1]):
            ok = valid[:, c]
            out[all_rows[ok], sens[ok, c]] = states[ok, c]
        return out

    decay = None
    if cfg.base == "SWTW":
        dt_us = (stream.timestamps[triggers][:, None] - stream.timestamps[safe]).astype(np.int64)
        decay = np.exp(-cfg.swtw_lambda * (dt_us[valid] / 1e6))
    counts = _weighted_counts(rows[valid], sens[valid], decay, t, m)
    if cfg.base in ("SW", "DW"):
        return counts

    last = stream.sensors[triggers]
    if cfg.base == "SWMI-Temp":
        if models.tmi is None:
            raise ConfigError("SWMI-Temp needs temporal MI matrices")
        seg = segment_codes(fractional_hours(stream.timestamps[triggers]), models.tmi.partition)
        weights = models.tmi.stacked()[seg, :, last]
    else:
        if models.mi is None:
            raise ConfigError(f"{cfg.base} needs an MI matrix")
        weights = models.mi.values[:, last].T
    return counts * weights


def feature_matrix(
    stream: EventStream,
    cfg: FeatureConfig,
    models: Models,
    n: int,
    triggers: np.ndarray | None = None,
    sizes: np.ndarray | None = None,
    lower: int = 0,
) -> np.ndarray:
    """Feature rows for the windows ending at ``triggers`` (default: all events).

    ``n`` is the window length; DW replaces it with the per-trigger size of
    ``models.dw``. Windows never reach before index ``lower``.
    """
    if triggers is None:
        triggers = np.arange(len(stream))
    triggers = np.asarray(triggers, dtype=np.int64)
    if sizes is None:
        if cfg.base == "DW":
            if models.dw is None:
                raise ConfigError("DW needs a fitted window-size model")
            sizes = models.dw.window_sizes(stream.sensors[triggers])
        else:
            sizes = np.full(len(triggers), n, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    dim = sum(d for _, d in layout_for(cfg, stream.m))
    out = np.zeros((len(triggers), dim))
    if not len(triggers):
        return out
    width = int(sizes.max())
    for a in range(0, len(triggers), _CHUNK):
        tr = triggers[a:a + _CHUNK]
        idx = window_index_matrix(tr, sizes[a:a + _CHUNK], width, lower)
        block = [_base_block(stream, idx, tr, cfg, models)]
        if cfg.cyclic:
            block.append(cyclic_matrix(stream.timestamps[tr]))
        if cfg.location_change:
            prev = idx[:, -2] if width > 1 else np.full(len(tr), -1)
            changed = (prev >= 0) & (stream.sensors[np.maximum(prev, 0)] != stream.sensors[tr])
            block.append(changed.astype(np.float64)[:, None])
        out[a:a + len(tr)] = np.hstack(block)
    if cfg.scaling == "minmax":
        if models.scaler is None:
            raise ConfigError("minmax scaling needs a fitted scaler")
        out = models.scaler.transform(out)
    return out


def fit_models(
    train: EventStream,
    cfg: FeatureConfig,
    n: int,
    options: ModelOptions = ModelOptions(),
) -> Models:
    """Fit whatever ``cfg`` needs, from ``train`` only."""
    m = train.m
    models = Models()
    if cfg.base in ("SWMI", "SWTW"):
        models = replace(models, mi=mi_global(train, m))
    elif cfg.base == "SWMI-Act":
        models = replace(models, mi=mi_activity(train, m))
    elif cfg.base == "SWMIex":
        presence = presence_matrix(train, n)
        models = replace(models, mi=mi_cooccurrence(presence, m))
    elif cfg.base == "SWMI-Temp":
        desc = activity_descriptors(train, options.include_other, options.standardize)
        partition = optimize_partition(desc, options.partition_grid)
        models = replace(
            models,
            partition=partition,
            tmi=mi_temporal(train, m, partition, adjacent_only=options.temporal_adjacent_only),
        )
    elif cfg.base == "DW":
        grid = tuple(g for g in options.dw_grid if g <= n) or (min(options.dw_grid),)
        models = replace(models, dw=fit_dw(train, grid))
    if cfg.scaling == "minmax":
        raw = feature_matrix(train, replace(cfg, scaling="none"), models, n)
        models = replace(models, scaler=MinMaxScaler.fit(raw))
    return models


def presence_matrix(stream: EventStream, n: int) -> np.ndarray:
    """Which sensors appear in each length-``n`` window of ``stream``."""
    out = np.zeros((len(stream), stream.m), dtype=bool)
    for a in range(0, len(stream), _CHUNK):
        tr = np.arange(a, min(a + _CHUNK, len(stream)))
        idx = window_index_matrix(tr, n, n)
        valid = idx >= 0
        rows = np.broadcast_to(np.arange(len(tr))[:, None], idx.shape)[valid]
        out[a + rows, stream.sensors[idx[valid]]] = True
    return out


# ---------------------------------------------------------------------------
# single-window API
# ---------------------------------------------------------------------------

def _one(w: LabeledWindow, cfg: FeatureConfig, models: Models = Models()) -> np.ndarray:
    if len(w) < 1:
        raise ValueError("empty window")
    return feature_matrix(w.stream, cfg, models, len(w), triggers=[w.end], sizes=[len(w)], lower=w.start)[0]


def count_vector(w: LabeledWindow) -> np.ndarray:
    return _one(w, FeatureConfig("SW"))


def swmi_vector(w: LabeledWindow, mi: MIMatrix) -> np.ndarray:
    """count_i * mi(i, sensor of the last event)."""
    return _one(w, FeatureConfig("SWMI"), Models(mi=mi))


def swmi_temp_vector(w: LabeledWindow, tmi: TemporalMI) -> np.ndarray:
    """SWMI with the matrix of the trigger event's day segment."""
    return _one(w, FeatureConfig("SWMI-Temp"), Models(tmi=tmi))


def bss_vector(w: LabeledWindow) -> np.ndarray:
    """Last state per sensor: +1 ON, -1 OFF, 0 absent."""
    return _one(w, FeatureConfig("BSS"))


def swls_vector(w: LabeledWindow) -> np.ndarray:
    return _one(w, FeatureConfig("SWLS"))


def swtw_vector(w: LabeledWindow, mi: MIMatrix, lam: float = DEFAULT_SWTW_LAMBDA) -> np.ndarray:
    """SWMI where each event is damped by exp(-lam * seconds before the trigger)."""
    return _one(w, FeatureConfig("SWTW", swtw_lambda=lam), Models(mi=mi))


def location_change(w: LabeledWindow) -> int:
    if len(w) < 2:
        return 0
    s = w.stream.sensors
    return int(s[w.end] != s[w.end - 1])


def assemble(w: LabeledWindow, cfg: FeatureConfig, models: Models = Models()) -> FeatureVector:
    return FeatureVector(_one(w, cfg, models), layout_for(cfg, w.stream.m))
