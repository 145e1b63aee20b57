"""Brute-force K-nearest-neighbour classifier with a fully deterministic
tie-break chain.

Neighbour order is (distance, training index): equal distances favour the
point inserted first. The vote is a plain majority; ties go to the label
whose closest neighbour is nearest, then to the lower canonical label index.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import label_rank

_QUERY_CHUNK = 256


@dataclass(frozen=True, eq=False)
class KnnModel:
    points: np.ndarray
    labels: np.ndarray
    k: int

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def fit(features, labels: Sequence[str], k: int) -> KnnModel:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=object)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array (samples x dims)")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} feature rows but {len(y)} labels")
    if len(x) == 0:
        raise ValueError("cannot fit KNN on an empty training set")
    if k < 1 or k > len(x):
        raise ValueError(f"k={k} must be between 1 and the number of samples ({len(x)})")
    return KnnModel(x.copy(), y.copy(), int(k))


def _exact_sq(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = points - q
    return np.einsum("nd,nd->n", diff, diff)


def _nearest_chunk(model: KnnModel, sq_norms: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """k nearest per query, ordered by (exact squared distance, index).

    The Gram expansion only screens candidates; anything within its rounding
    bound of the k-th value is re-scored with explicit differences so
    duplicates and exact ties resolve the same way as a full sort.
    """
    k = model.k
    n = len(model.points)
    q_norms = np.einsum("qd,qd->q", q, q)
    approx = sq_norms[None, :] + q_norms[:, None] - 2.0 * (q @ model.points.T)
    tol = 1e-9 * (q_norms + sq_norms.max()) + 1e-12
    if k < n:
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
    else:
        kth = approx.max(axis=1)
    idx = np.empty((len(q), k), dtype=np.int64)
    dist = np.empty((len(q), k))
    for r in range(len(q)):
        cand = np.flatnonzero(approx[r] <= kth[r] + 2 * tol[r])
        d = _exact_sq(model.points[cand], q[r])
        order = np.lexsort((cand, d))[:k]
        idx[r] = cand[order]
        dist[r] = d[order]
    return idx, dist


def vote(labels: np.ndarray, dists: np.ndarray):
    tally = Counter(labels.tolist())
    top = max(tally.values())
    tied = [lab for lab, c in tally.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    closest = {}
    for lab, d in zip(labels.tolist(), dists.tolist()):
        closest.setdefault(lab, d)  # neighbours arrive nearest first
    return min(tied, key=lambda lab: (closest[lab], label_rank(lab)))


def neighbours(model: KnnModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """(indices, squared distances) of the k nearest training points."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[1] != model.dim:
        raise ValueError(f"query has {q.shape[1]} dims, model expects {model.dim}")
    sq_norms = np.einsum("nd,nd->n", model.points, model.points)
    chunk = max(1, min(_QUERY_CHUNK, 4_000_000 // len(model.points)))
    idx = np.empty((len(q), model.k), dtype=np.int64)
    dist = np.empty((len(q), model.k))
    for a in range(0, len(q), chunk):
        idx[a:a + chunk], dist[a:a + chunk] = _nearest_chunk(model, sq_norms, q[a:a + chunk])
    return idx, dist


def predict_many(model: KnnModel, queries) -> np.ndarray:
    idx, dist = neighbours(model, queries)
    return np.array([vote(model.labels[i], d) for i, d in zip(idx, dist)], dtype=object)


def predict(model: KnnModel, x) -> str:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes one feature vector; use predict_many for batches")
    return predict_many(model, x[None, :])[0]
