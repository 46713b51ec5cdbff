"""Exact Euclidean minimum spanning trees and cross-label edge counts.

The cross-match statistic of Friedman and Rafsky for two point samples is
the number of edges in the Euclidean MST of the pooled points whose
endpoints come from different samples. Trees are built exactly with Prim's
algorithm over implicit distances: O(n^2) time, O(n) memory, no stored
distance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionMismatch, DuplicatePoints, LabelMismatch, NonFiniteInput

LABEL_P = 0
LABEL_Q = 1


@dataclass(frozen=True)
class PointCloud:
    """Immutable n x K matrix of distinct, finite points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"expected an n x K matrix with n, K >= 1, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise NonFiniteInput("point coordinates must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise DuplicatePoints("point set contains identical rows")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LabeledSampleSet:
    """Pooled points with a 0/1 origin label per row (0 = first sample)."""

    cloud: PointCloud
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.ndim != 1 or labels.shape[0] != self.cloud.n:
            raise LabelMismatch(
                f"got {labels.shape[0] if labels.ndim == 1 else labels.shape} labels "
                f"for {self.cloud.n} points"
            )
        if not np.isin(labels, (LABEL_P, LABEL_Q)).all():
            raise ValueError("labels must be LABEL_P (0) or LABEL_Q (1)")
        if (labels == LABEL_P).sum() < 1 or (labels == LABEL_Q).sum() < 1:
            raise ValueError("each origin needs at least one point")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_clouds(cls, xp: PointCloud, xq: PointCloud) -> "LabeledSampleSet":
        if xp.dim != xq.dim:
            raise DimensionMismatch(f"dimension mismatch: {xp.dim} vs {xq.dim}")
        pooled = PointCloud(np.vstack([xp.points, xq.points]))
        labels = np.concatenate(
            [np.full(xp.n, LABEL_P, np.int8), np.full(xq.n, LABEL_Q, np.int8)]
        )
        return cls(pooled, labels)

    @property
    def n_p(self) -> int:
        return int((self.labels == LABEL_P).sum())

    @property
    def n_q(self) -> int:
        return int((self.labels == LABEL_Q).sum())


@dataclass(frozen=True)
class SpanningTree:
    """Edges of a spanning tree, each row (a, b) with a < b, sorted lexicographically."""

    edges: np.ndarray
    weights: np.ndarray
    node_count: int

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


@njit(cache=True, nogil=True, fastmath=True)
def _prim_squared(points):  # pragma: no cover - exercised via build_emst
    n, k = points.shape
    in_tree = np.zeros(n, np.bool_)
    best = np.empty(n)
    parent = np.empty(n, np.int64)
    edges = np.empty((n - 1, 2), np.int64)
    w2 = np.empty(n - 1)
    in_tree[0] = True
    for i in range(1, n):
        d2 = 0.0
        for c in range(k):
            t = points[i, c] - points[0, c]
            d2 += t * t
        best[i] = d2
        parent[i] = 0
    for m in range(n - 1):
        # nearest outside vertex; ties broken by lexicographic (min, max) edge order
        j = -1
        bd = np.inf
        for i in range(1, n):
            if in_tree[i]:
                continue
            if best[i] < bd:
                bd = best[i]
                j = i
            elif best[i] == bd and j >= 0:
                a1 = min(i, parent[i])
                b1 = max(i, parent[i])
                a2 = min(j, parent[j])
                b2 = max(j, parent[j])
                if a1 < a2 or (a1 == a2 and b1 < b2):
                    j = i
        in_tree[j] = True
        edges[m, 0] = min(j, parent[j])
        edges[m, 1] = max(j, parent[j])
        w2[m] = bd
        for i in range(1, n):
            if in_tree[i]:
                continue
            d2 = 0.0
            for c in range(k):
                t = points[i, c] - points[j, c]
                d2 += t * t
            if d2 < best[i]:
                best[i] = d2
                parent[i] = j
            elif d2 == best[i]:
                a1 = min(i, j)
                b1 = max(i, j)
                a2 = min(i, parent[i])
                b2 = max(i, parent[i])
                if a1 < a2 or (a1 == a2 and b1 < b2):
                    parent[i] = j
    return edges, w2


def build_emst(cloud: PointCloud) -> SpanningTree:
    """Exact Euclidean MST of the cloud (Prim, squared-distance comparisons).

    Deterministic: equal-weight candidate edges are resolved by lexicographic
    (min_index, max_index) order, and the returned edge list is sorted the
    same way.
    """
    if cloud.n < 2:
        raise ValueError("a spanning tree needs at least 2 points")
    edges, w2 = _prim_squared(cloud.points)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return SpanningTree(edges=edges[order], weights=np.sqrt(w2[order]), node_count=cloud.n)


def count_cross_edges(tree: SpanningTree, labels) -> int:
    """Number of tree edges whose endpoints carry different labels."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != tree.node_count:
        raise LabelMismatch(
            f"got {labels.shape[0] if labels.ndim == 1 else labels.shape} labels "
            f"for {tree.node_count} nodes"
        )
    return int((labels[tree.edges[:, 0]] != labels[tree.edges[:, 1]]).sum())


def fr_statistic(xp: PointCloud, xq: PointCloud) -> tuple[int, int, int]:
    """Cross-match count C of the pooled-EMST two-sample statistic.

    Returns ``(C, n_p, n_q)``.
    """
    pooled = LabeledSampleSet.from_clouds(xp, xq)
    tree = build_emst(pooled.cloud)
    return count_cross_edges(tree, pooled.labels), pooled.n_p, pooled.n_q
