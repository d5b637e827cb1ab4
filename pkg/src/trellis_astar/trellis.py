"""Cluster trellis: per-cluster nodes holding min-heaps over two-partitions.

The trellis is the search graph.  Every node is keyed by a cluster mask;
a node's children are canonical two-partitions (left | right == cluster,
left & right == 0, left < right as ints).  A full trellis conceptually
contains every nonempty subset of the element set and enumerates all
2^(k-1) - 1 partitions of a size-k node; nodes are materialized lazily
so that a search that halts early never allocates the full powerset.  A
sparse trellis contains only the nodes added to it and, per node, only
the recorded candidate partitions.

Each explored node owns a heap of entries ordered by (f, left); f = g + h
is always derived, never stored independently of its parts.  The heap
minimum doubles as the node's best split pointer and best value.
"""

from __future__ import annotations

import heapq
import os
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

from .core import (
    CapacityError,
    Cluster,
    DomainError,
    MissingNodeError,
    SearchExhaustedError,
    full_mask,
    is_singleton,
)

MAX_NODES_ENV = "TRELLIS_ASTAR_MAX_NODES"
DEFAULT_MAX_NODES = 4_194_304
EXACT_MODE_WIDTH_CAP = 128


def max_nodes_cap() -> int:
    raw = os.environ.get(MAX_NODES_ENV)
    if raw is None:
        return DEFAULT_MAX_NODES
    try:
        cap = int(raw)
    except ValueError as exc:
        raise CapacityError(f"{MAX_NODES_ENV} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise CapacityError(f"{MAX_NODES_ENV} must be positive, got {cap}")
    return cap


class HeapEntry(NamedTuple):
    """One candidate split on a node's queue.

    Field order gives the heap key: primary f, tie-break on the left
    cluster's bit pattern (left determines right within one node, so the
    key is unique and g/h never participate in comparisons).
    """

    f: float
    left: Cluster
    g: float
    h: float
    right: Cluster


def make_entry(g: float, h: float, left: Cluster, right: Cluster) -> HeapEntry:
    if left > right:
        left, right = right, left
    return HeapEntry(g + h, left, g, h, right)


class TrellisNode:
    """A cluster plus its (lazily instantiated) queue of candidate splits.

    `queue is None` means unexplored.  Singleton nodes are never explored
    and keep `queue is None` permanently.  `recorded` holds the sparse
    trellis's candidate child pairs; it is None on full-trellis nodes,
    whose children are enumerated instead.
    """

    __slots__ = ("cluster", "queue", "recorded")

    def __init__(self, cluster: Cluster, sparse: bool) -> None:
        self.cluster = cluster
        self.queue: Optional[list[HeapEntry]] = None
        self.recorded: Optional[set[tuple[Cluster, Cluster]]] = set() if sparse else None

    @property
    def explored(self) -> bool:
        return self.queue is not None

    def peek(self) -> HeapEntry:
        if not self.queue:
            raise SearchExhaustedError(f"node {self.cluster:#x} has no heap entries")
        return self.queue[0]

    @property
    def best_split(self) -> Optional[tuple[Cluster, Cluster]]:
        if not self.queue:
            return None
        top = self.queue[0]
        return (top.left, top.right)

    @property
    def best_value(self) -> Optional[float]:
        return self.queue[0].f if self.queue else None

    def pop(self) -> HeapEntry:
        if not self.queue:
            raise SearchExhaustedError(f"node {self.cluster:#x} has no heap entries")
        return heapq.heappop(self.queue)

    def push(self, entry: HeapEntry) -> None:
        assert self.queue is not None
        heapq.heappush(self.queue, entry)


@dataclass
class PartialHierarchy:
    """The search state of Eq.-(tree-from-trellis): best-split paths from root.

    `clusters` lists every cluster reached (root first, in DFS order).
    `frontier` holds the unexplored non-singleton leaves, the ones the
    search must explore next.  `dead_ends` holds explored non-singleton
    leaves whose queues are empty; a state containing one represents no
    completable tree through that leaf.
    """

    clusters: list[Cluster] = field(default_factory=list)
    frontier: list[Cluster] = field(default_factory=list)
    dead_ends: list[Cluster] = field(default_factory=list)

    @property
    def is_complete(self) -> bool:
        return not self.frontier and not self.dead_ends

    def leaf_count(self) -> int:
        """Leaves of the partial tree: singletons plus unexpanded clusters."""
        return (
            len(self.frontier)
            + len(self.dead_ends)
            + sum(1 for c in self.clusters if is_singleton(c))
        )


class Trellis:
    """Node storage keyed by cluster, full or sparse.

    A full trellis answers membership for every nonempty subset of the
    root and materializes node objects on first touch; len() still
    reports the conceptual 2^n - 1.  A sparse trellis contains exactly
    the nodes added via `ensure_node` / `record_split`.
    """

    def __init__(self, n: int, *, full: bool, max_nodes: Optional[int] = None) -> None:
        self.n = n
        self.root = full_mask(n)
        self.full = full
        self.max_nodes = max_nodes_cap() if max_nodes is None else max_nodes
        self._nodes: dict[Cluster, TrellisNode] = {}
        self.ensure_node(self.root)

    # -- membership and access ------------------------------------------------

    def __contains__(self, cluster: Cluster) -> bool:
        if self.full:
            return cluster != 0 and cluster & ~self.root == 0
        return cluster in self._nodes

    def __len__(self) -> int:
        if self.full:
            return (1 << self.n) - 1
        return len(self._nodes)

    @property
    def materialized(self) -> int:
        return len(self._nodes)

    def node(self, cluster: Cluster) -> TrellisNode:
        nd = self._nodes.get(cluster)
        if nd is None:
            if not self.full or cluster not in self:
                raise MissingNodeError(f"cluster {cluster:#x} is not in the trellis")
            nd = self._materialize(cluster)
        return nd

    def _materialize(self, cluster: Cluster) -> TrellisNode:
        if len(self._nodes) >= self.max_nodes:
            raise CapacityError(
                f"trellis exceeds {self.max_nodes} nodes (set {MAX_NODES_ENV} to raise)"
            )
        nd = TrellisNode(cluster, sparse=not self.full)
        self._nodes[cluster] = nd
        return nd

    def ensure_node(self, cluster: Cluster) -> TrellisNode:
        if cluster == 0 or cluster & ~self.root:
            raise DomainError(f"cluster {cluster:#x} invalid for element set {self.root:#x}")
        nd = self._nodes.get(cluster)
        return nd if nd is not None else self._materialize(cluster)

    def record_split(self, parent: Cluster, left: Cluster, right: Cluster) -> None:
        """Record (left, right) as a candidate child pair of parent (sparse only)."""
        if left > right:
            left, right = right, left
        if left & right or left | right != parent:
            raise MissingNodeError(
                f"({left:#x}, {right:#x}) is not a two-partition of {parent:#x}"
            )
        nd = self.ensure_node(parent)
        self.ensure_node(left)
        self.ensure_node(right)
        if nd.recorded is not None:
            nd.recorded.add((left, right))

    # -- children enumeration -------------------------------------------------

    def children_pairs(self, cluster: Cluster) -> Iterator[tuple[Cluster, Cluster]]:
        """Candidate two-partitions of a node.

        Full trellis: all 2^(k-1) - 1 canonical partitions.  Sparse: the
        recorded pairs, in deterministic (left, right) order.
        """
        if cluster not in self:
            raise MissingNodeError(f"cluster {cluster:#x} is not in the trellis")
        if cluster == 0 or is_singleton(cluster):
            raise DomainError(f"cluster {cluster:#x} has no two-partitions")
        if self.full:
            return _enumerate_splits(cluster)
        nd = self.node(cluster)
        return iter(sorted(nd.recorded or ()))

    # -- debugging export ------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-ready map: hex cluster -> explored/best split/value/queue size."""
        out = {}
        for cluster, nd in sorted(self._nodes.items()):
            best = nd.best_split
            out[format(cluster, "x")] = {
                "explored": nd.explored,
                "best_split": [format(best[0], "x"), format(best[1], "x")] if best else None,
                "best_value": nd.best_value,
                "queue_size": len(nd.queue) if nd.queue is not None else 0,
            }
        return out


def _enumerate_splits(cluster: Cluster) -> Iterator[tuple[Cluster, Cluster]]:
    """All canonical two-partitions of a cluster, each unordered pair once.

    The lowest member is pinned to one side, the other side `s` walks the
    submasks of the remainder; numeric (min, max) orientation is restored
    per pair.
    """
    rest = cluster & (cluster - 1)  # drop lowest set bit
    s = rest
    while s:
        other = cluster ^ s
        yield (s, other) if s < other else (other, s)
        s = (s - 1) & rest


def split_count(k: int) -> int:
    """Number of two-partitions of a size-k cluster: 2^(k-1) - 1."""
    return (1 << (k - 1)) - 1 if k >= 1 else 0


def full_trellis(n: int, *, max_nodes: Optional[int] = None) -> Trellis:
    """Trellis over the whole powerset: one node per nonempty subset.

    Exact mode is capped at bit-set width 128 and by the node-count cap
    (env TRELLIS_ASTAR_MAX_NODES); queues stay uninstantiated until
    exploration.
    """
    if n < 1:
        raise DomainError(f"element count must be >= 1, got {n}")
    if n > EXACT_MODE_WIDTH_CAP:
        raise CapacityError(f"exact mode supports n <= {EXACT_MODE_WIDTH_CAP}, got {n}")
    cap = max_nodes_cap() if max_nodes is None else max_nodes
    if n <= 62 and (1 << n) - 1 > cap:
        raise CapacityError(
            f"full trellis over {n} elements needs {(1 << n) - 1} nodes, cap is {cap}"
        )
    return Trellis(n, full=True, max_nodes=cap)


def sparse_trellis(n: int, *, max_nodes: Optional[int] = None) -> Trellis:
    return Trellis(n, full=False, max_nodes=max_nodes)


def extract_state(trellis: Trellis) -> PartialHierarchy:
    """Follow best-split pointers from the root (Eq. tree-from-trellis).

    Descent stops at singletons, at unexplored nodes (-> frontier) and at
    explored nodes with empty queues (-> dead ends).  Raises
    SearchExhaustedError when the root itself is explored and empty.
    """
    state = PartialHierarchy()
    root_node = trellis.node(trellis.root)
    if root_node.explored and not root_node.queue and not is_singleton(trellis.root):
        raise SearchExhaustedError("root queue is empty: no tree is representable")
    stack = [trellis.root]
    while stack:
        cluster = stack.pop()
        state.clusters.append(cluster)
        if is_singleton(cluster):
            continue
        nd = trellis.node(cluster)
        if nd.queue is None:
            state.frontier.append(cluster)
        elif not nd.queue:
            state.dead_ends.append(cluster)
        else:
            top = nd.queue[0]
            stack.append(top.right)
            stack.append(top.left)
    return state
