"""Morning / afternoon / night thresholds learned from activity instances.

Each activity instance (a maximal run of one label) becomes a descriptor:
one-hot activity, start hour and event count. For every candidate triple
``mu < alpha < nu`` the descriptors are grouped by start hour and the
triple with the most cohesive groups (smallest mean within-group squared
distance to the centroid) is kept.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .events import OTHER, EventStream, label_rank

DEFAULT_HOUR_GRID: tuple[int, ...] = tuple(range(24))


class Segment(str, Enum):
    MORNING = "morning"
    AFTERNOON = "afternoon"
    NIGHT = "night"


@dataclass(frozen=True)
class DayPartition:
    mu: float
    alpha: float
    nu: float

    def __post_init__(self):
        if not 0 <= self.mu < self.alpha < self.nu < 24:
            raise ValueError(f"need 0 <= mu < alpha < nu < 24, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.mu, self.alpha, self.nu)

    def to_dict(self) -> dict[str, float]:
        return {"mu": float(self.mu), "alpha": float(self.alpha), "nu": float(self.nu)}


@dataclass(frozen=True)
class ActivityDescriptor:
    label: str
    activity_onehot: np.ndarray
    start_hour: float
    event_count: int


@dataclass(frozen=True)
class Descriptors:
    """Descriptors plus the matrix actually used for distances."""

    items: tuple[ActivityDescriptor, ...]
    matrix: np.ndarray  # rows: [onehot..., hour, count] (standardised if requested)
    hours: np.ndarray   # raw start hours, used for grouping

    def __len__(self) -> int:
        return len(self.items)


def segment_of(hour: float, p: DayPartition) -> Segment:
    if p.mu <= hour < p.alpha:
        return Segment.MORNING
    if p.alpha <= hour < p.nu:
        return Segment.AFTERNOON
    return Segment.NIGHT


def segment_codes(hours: np.ndarray, p: DayPartition) -> np.ndarray:
    """Vectorised :func:`segment_of`: 0 morning, 1 afternoon, 2 night."""
    hours = np.asarray(hours, dtype=float)
    codes = np.full(hours.shape, 2, dtype=np.int8)
    codes[(hours >= p.mu) & (hours < p.alpha)] = 0
    codes[(hours >= p.alpha) & (hours < p.nu)] = 1
    return codes


def _standardise(col: np.ndarray) -> np.ndarray:
    std = col.std()
    return (col - col.mean()) / std if std > 0 else col - col.mean()


def activity_descriptors(
    train: EventStream,
    include_other: bool = False,
    standardize: bool = True,
) -> Descriptors:
    if not len(train):
        return Descriptors((), np.zeros((0, 0)), np.zeros(0))
    labels = train.labels
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    counts = np.diff(np.concatenate([starts, [len(labels)]]))
    hours = train.hours()[starts]
    run_labels = labels[starts]
    keep = np.ones(len(starts), dtype=bool) if include_other else run_labels != OTHER
    run_labels, hours, counts = run_labels[keep], hours[keep], counts[keep]

    classes = sorted(set(run_labels.tolist()), key=label_rank)
    col = {c: i for i, c in enumerate(classes)}
    onehot = np.zeros((len(run_labels), len(classes)))
    onehot[np.arange(len(run_labels)), [col[l] for l in run_labels]] = 1.0

    items = tuple(
        ActivityDescriptor(l, onehot[i], float(h), int(c))
        for i, (l, h, c) in enumerate(zip(run_labels, hours, counts))
    )
    num = np.column_stack([hours.astype(float), counts.astype(float)])
    if standardize and len(items):
        num = np.column_stack([_standardise(num[:, 0]), _standardise(num[:, 1])])
    return Descriptors(items, np.hstack([onehot, num]), hours.astype(float))


def _as_arrays(descriptors) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(descriptors, Descriptors):
        return descriptors.matrix, descriptors.hours
    items = list(descriptors)
    matrix = np.array(
        [np.concatenate([d.activity_onehot, [d.start_hour, d.event_count]]) for d in items], dtype=float
    )
    return matrix, np.array([d.start_hour for d in items], dtype=float)


def _group_spread(x: np.ndarray) -> float:
    """Mean squared Euclidean distance to the centroid."""
    centred = x - x.mean(axis=0)
    return float(np.einsum("ij,ij->", centred, centred) / len(x))


def _cohesion(matrix: np.ndarray, codes: np.ndarray) -> float:
    spreads = [_group_spread(matrix[codes == g]) for g in range(3) if np.any(codes == g)]
    return sum(spreads) / len(spreads)


def cohesion(p: DayPartition, descriptors) -> float:
    """Mean over non-empty day segments of the within-segment spread.

    Accepts a :class:`Descriptors` bundle or a list of
    :class:`ActivityDescriptor` (raw, unstandardised components).
    """
    matrix, hours = _as_arrays(descriptors)
    if not len(matrix):
        raise ValueError("cohesion needs at least one descriptor")
    return _cohesion(matrix, segment_codes(hours, p))


def candidate_triples(grid: Sequence[float]):
    values = sorted(set(float(g) for g in grid))
    if len(values) < 3 or values[0] < 0 or values[-1] >= 24:
        raise ValueError("partition grid needs >= 3 distinct hours in [0, 24)")
    return itertools.combinations(values, 3)


def _screen_scores(matrix: np.ndarray, hours: np.ndarray, triples: np.ndarray) -> np.ndarray:
    """Approximate cohesion of every triple at once from prefix sums over
    hour-sorted descriptors (spread = E|x|^2 - |E x|^2 per group)."""
    order = np.argsort(hours, kind="stable")
    x, h = matrix[order], hours[order]
    zero = np.zeros((1, x.shape[1]))
    csum = np.vstack([zero, np.cumsum(x, axis=0)])
    csq = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", x, x))])
    cut = np.searchsorted(h, triples, side="left")  # first index with hour >= threshold
    i_mu, i_al, i_nu = cut[:, 0], cut[:, 1], cut[:, 2]
    n = len(x)

    def spread(cnt, s, q):
        safe = np.maximum(cnt, 1)
        return np.where(cnt > 0, q / safe - np.einsum("ij,ij->i", s, s) / safe**2, 0.0), cnt > 0

    morning = spread(i_al - i_mu, csum[i_al] - csum[i_mu], csq[i_al] - csq[i_mu])
    afternoon = spread(i_nu - i_al, csum[i_nu] - csum[i_al], csq[i_nu] - csq[i_al])
    night = spread(
        i_mu + n - i_nu,
        csum[i_mu] + csum[n] - csum[i_nu],
        csq[i_mu] + csq[n] - csq[i_nu],
    )
    total = morning[0] + afternoon[0] + night[0]
    groups = morning[1].astype(int) + afternoon[1] + night[1]
    return total / groups


def optimize_partition(descriptors, grid: Sequence[float] = DEFAULT_HOUR_GRID) -> DayPartition:
    """Exhaustive search of the grid; ties go to the lexicographically
    smallest ``(mu, alpha, nu)``.

    All triples are screened with prefix sums; every triple within the
    screen's rounding bound of the best is re-scored with :func:`cohesion`'s
    exact formula, so the result is the exact minimiser.
    """
    matrix, hours = _as_arrays(descriptors)
    if not len(matrix):
        raise ValueError("no activity descriptors to cluster")
    triples = np.array(list(candidate_triples(grid)), dtype=float)
    approx = _screen_scores(matrix, hours, triples)
    # prefix-sum rounding grows with the squared row norms
    tol = 1e-9 * (1.0 + float(np.einsum("ij,ij->i", matrix, matrix).max()))
    best, best_score = None, np.inf
    cache: dict[bytes, float] = {}
    # triples are in lexicographic order, so strict < keeps the smallest
    for i in np.flatnonzero(approx <= approx.min() + tol):
        triple = tuple(float(v) for v in triples[i])
        codes = segment_codes(hours, DayPartition(*triple))
        key = codes.tobytes()
        score = cache.get(key)
        if score is None:
            score = cache[key] = _cohesion(matrix, codes)
        if score < best_score:
            best, best_score = triple, score
    return DayPartition(*best)
