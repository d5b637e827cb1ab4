"""Similarity-graph objectives: hierarchical correlation clustering and Dasgupta.

Both objectives read a symmetric weight matrix with zero diagonal.

Hierarchical correlation clustering charges, at every sibling pair, the
positive weights crossing the cut plus the absolute negative weights
inside each side; its heuristic is the positive weight inside a cluster
(every edge eventually crosses some cut, so this never overshoots).

Dasgupta's cost charges (|left| + |right|) times the crossing weight and
requires nonnegative weights; its heuristic is the total weight inside a
cluster (each edge crosses exactly one cut, with multiplier >= 2, so
coefficient 1 is a safe lower bound).

Per-cluster weight sums (positive / absolute-negative / total within)
are cached on the graph and built incrementally by peeling one element,
which keeps a single psi evaluation O(cluster size) instead of O(size^2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    BadInputError,
    Cluster,
    DomainError,
    ObjectiveMismatchError,
    iter_elements,
)


class ClusterAggregates(NamedTuple):
    """Weight sums over pairs inside one cluster."""

    pos_within: float
    neg_within: float  # sum of |w| over negative edges
    total_within: float


_EMPTY = ClusterAggregates(0.0, 0.0, 0.0)


@dataclass
class SimilarityGraph:
    """Symmetric pairwise weights over n elements, zero self-edges.

    Treated as immutable after construction; the aggregate cache is an
    idempotent memo keyed by cluster mask.
    """

    n: int
    weights: np.ndarray
    _aggregates: dict[Cluster, ClusterAggregates] = field(
        default_factory=dict, repr=False
    )

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n, self.n):
            raise DomainError(f"weights must be {self.n}x{self.n}, got {w.shape}")
        if not np.allclose(w, w.T):
            raise DomainError("weights must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise DomainError("self-edges are not allowed")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        self.weights = w

    @property
    def min_weight(self) -> float:
        off = self.weights[~np.eye(self.n, dtype=bool)]
        return float(off.min()) if off.size else 0.0

    @classmethod
    def from_edges(cls, n: int, edges) -> "SimilarityGraph":
        """Build from (i, j, w) triples, i < j; unlisted pairs weigh 0."""
        w = np.zeros((n, n))
        for i, j, wij in edges:
            if not (0 <= i < j < n):
                raise DomainError(f"edge ({i}, {j}) out of range for n={n}")
            w[i, j] = wij
            w[j, i] = wij
        return cls(n, w)

    def aggregates(self, cluster: Cluster) -> ClusterAggregates:
        """Positive / negative / total weight sums inside a cluster."""
        agg = self._aggregates.get(cluster)
        if agg is not None:
            return agg
        rest = cluster & (cluster - 1)
        if rest == 0:
            agg = _EMPTY
        else:
            base = self.aggregates(rest)
            i = (cluster & -cluster).bit_length() - 1
            row = self.weights[i]
            pos = base.pos_within
            neg = base.neg_within
            tot = base.total_within
            for j in iter_elements(rest):
                wij = row[j]
                tot += wij
                if wij > 0.0:
                    pos += wij
                elif wij < 0.0:
                    neg -= wij
            agg = ClusterAggregates(pos, neg, tot)
        self._aggregates[cluster] = agg
        return agg


def mean_center(g: SimilarityGraph) -> SimilarityGraph:
    """Subtract the mean over all i<j pair weights from every weight."""
    if g.n < 2:
        raise DomainError("mean centering needs at least 2 elements")
    iu = np.triu_indices(g.n, k=1)
    mean = float(g.weights[iu].mean())
    w = g.weights - mean
    np.fill_diagonal(w, 0.0)
    return SimilarityGraph(g.n, w)


# ---------------------------------------------------------------------------
# Hierarchical correlation clustering
# ---------------------------------------------------------------------------


def hcc_psi(left: Cluster, right: Cluster, g: SimilarityGraph) -> float:
    """Positive cross-cut weight plus |negative| weight inside each side."""
    a_p = g.aggregates(left | right)
    a_l = g.aggregates(left)
    a_r = g.aggregates(right)
    pos_cross = a_p.pos_within - a_l.pos_within - a_r.pos_within
    return pos_cross + a_l.neg_within + a_r.neg_within


def hcc_heuristic(cluster: Cluster, g: SimilarityGraph) -> float:
    """Sum of positive weights inside the cluster; 0 for singletons."""
    return g.aggregates(cluster).pos_within


# ---------------------------------------------------------------------------
# Dasgupta's cost
# ---------------------------------------------------------------------------


def _require_nonnegative(g: SimilarityGraph) -> None:
    if g.min_weight < 0.0:
        raise ObjectiveMismatchError(
            "Dasgupta's cost requires nonnegative weights "
            f"(min weight {g.min_weight})"
        )


def dasgupta_psi(left: Cluster, right: Cluster, g: SimilarityGraph) -> float:
    """(|left| + |right|) times the total weight crossing the cut."""
    _require_nonnegative(g)
    parent = left | right
    a_p = g.aggregates(parent)
    a_l = g.aggregates(left)
    a_r = g.aggregates(right)
    cross = a_p.total_within - a_l.total_within - a_r.total_within
    return parent.bit_count() * cross


def dasgupta_heuristic(cluster: Cluster, g: SimilarityGraph) -> float:
    """Sum of all weights inside the cluster; 0 for singletons."""
    _require_nonnegative(g)
    return g.aggregates(cluster).total_within


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def load_graph(path) -> SimilarityGraph:
    """Read the edge-list format: first line "n m", then m lines "i j w"."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise BadInputError(f"{path}: first line must be 'n m'")
        try:
            n, m = int(header[0]), int(header[1])
        except ValueError as exc:
            raise BadInputError(f"{path}: first line must be 'n m'") from exc
        edges = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise BadInputError(f"{path}:{lineno}: expected 'i j w'")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise BadInputError(f"{path}:{lineno}: expected 'i j w'") from exc
            if not 0 <= i < j < n:
                raise BadInputError(f"{path}:{lineno}: need 0 <= i < j < n")
            edges.append((i, j, w))
    if len(edges) != m:
        raise BadInputError(f"{path}: header promises {m} edges, found {len(edges)}")
    try:
        return SimilarityGraph.from_edges(n, edges)
    except DomainError as exc:
        raise BadInputError(f"{path}: {exc}") from exc


def save_graph(g: SimilarityGraph, path) -> None:
    iu = np.triu_indices(g.n, k=1)
    rows = [
        (int(i), int(j), float(g.weights[i, j]))
        for i, j in zip(*iu)
        if g.weights[i, j] != 0.0
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n} {len(rows)}\n")
        for i, j, w in rows:
            fh.write(f"{i} {j} {w!r}\n")


def load_points_csv(path) -> np.ndarray:
    """Read a headerless CSV of float rows, one element per row."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            try:
                rows.append([float(x) for x in rec])
            except ValueError as exc:
                raise BadInputError(f"{path}:{lineno}: non-numeric field") from exc
    if not rows:
        raise BadInputError(f"{path}: no rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise BadInputError(f"{path}: rows have differing column counts")
    return np.asarray(rows, dtype=float)


def cosine_similarity_graph(points: np.ndarray) -> SimilarityGraph:
    """Pairwise cosine similarities; rejects zero vectors."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 1:
        raise DomainError("points must be a nonempty 2-D array")
    norms = np.linalg.norm(points, axis=1)
    if np.any(norms == 0.0):
        raise DomainError("zero vectors have no cosine similarity")
    unit = points / norms[:, None]
    w = unit @ unit.T
    np.fill_diagonal(w, 0.0)
    w = (w + w.T) / 2.0
    return SimilarityGraph(points.shape[0], w)


def graph_from_points(points: np.ndarray) -> SimilarityGraph:
    """The benchmark ingestion pipeline: cosine similarity, then mean centering."""
    return mean_center(cosine_similarity_graph(points))
