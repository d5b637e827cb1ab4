"""Best-first search over the cluster trellis.

The loop alternates three phases until the extracted state is a goal:

  1. extract the current best partial hierarchy by following each node's
     heap minimum from the root down;
  2. explore the state's unexplored leaves, instantiating their heaps
     with one entry per candidate split, where g is the realized cost of
     the split's partial sub-tree and h the heuristic estimate of the
     remaining cost;
  3. re-score the heap minimum of every node on the state, leaves to
     root, so parent entries see their children's current best values.

A node's heap minimum serves as its best-split pointer; entries below
the minimum may carry values computed at an earlier visit and are only
re-scored when they surface.  The goal test is the literal one: the
state's leaves are all singletons and the root minimum's h is zero.  The
returned cost is cross-checked against a from-scratch re-evaluation of
the extracted tree; on the (tie-induced) occasions where a surfaced
minimum is out of date, the loop simply continues until the state is
self-consistent.

Infinite psi values flow through as +inf entries, so kinematically
impossible splits are representable and never chosen while a finite
alternative exists; a root minimum of +inf means no finite tree exists.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Cluster,
    CostModel,
    DatasetContext,
    DomainError,
    Hierarchy,
    SearchExhaustedError,
    is_singleton,
    sibling_pairs,
)
from .trellis import (
    HeapEntry,
    PartialHierarchy,
    Trellis,
    extract_state,
    make_entry,
)

GOAL_COST_RTOL = 1e-9


@dataclass
class SearchStats:
    """Counters for one search run.

    `trees_in_trellis_log10` is log10 of the number of complete
    hierarchies representable by the explored sub-trellis, computed by
    the product recurrence over recorded splits (singletons count 1,
    unexplored clusters 0).
    """

    nodes_explored: int = 0
    heap_pushes: int = 0
    heap_pops: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    trees_in_trellis_log10: float = float("-inf")

    def as_dict(self) -> dict:
        return {
            "nodes_explored": self.nodes_explored,
            "heap_pushes": self.heap_pushes,
            "heap_pops": self.heap_pops,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "trees_in_trellis_log10": self.trees_in_trellis_log10,
        }


@dataclass
class SearchResult:
    cost: float
    tree: Hierarchy
    stats: SearchStats


class Evaluator:
    """Per-search memo of psi and heuristic values.

    psi of a fixed split and the heuristic of a fixed cluster never
    change during a run, so both are cached by cluster mask.
    """

    __slots__ = ("model", "ctx", "_psi", "_h")

    def __init__(self, model: CostModel, ctx: DatasetContext) -> None:
        self.model = model
        self.ctx = ctx
        self._psi: dict[tuple[Cluster, Cluster], float] = {}
        self._h: dict[Cluster, float] = {}

    def psi(self, left: Cluster, right: Cluster) -> float:
        if left > right:
            left, right = right, left
        key = (left, right)
        val = self._psi.get(key)
        if val is None:
            val = self.model.psi(left, right, self.ctx)
            self._psi[key] = val
        return val

    def heuristic(self, cluster: Cluster) -> float:
        if is_singleton(cluster):
            return 0.0
        val = self._h.get(cluster)
        if val is None:
            val = self.model.heuristic(cluster, self.ctx)
            if not math.isfinite(val):
                raise DomainError(f"heuristic is not finite on cluster {cluster:#x}")
            self._h[cluster] = val
        return val

    def tree_cost(self, tree: Hierarchy) -> float:
        return sum(self.psi(l, r) for l, r in sibling_pairs(tree))


def _g_best(trellis: Trellis, cluster: Cluster) -> float:
    """Realized cost of the best sub-state rooted at a cluster (0 if unknown)."""
    if is_singleton(cluster):
        return 0.0
    nd = trellis.node(cluster)
    if nd.queue:
        return nd.queue[0].g
    return 0.0


def _h_best(trellis: Trellis, cluster: Cluster, ev: Evaluator) -> float:
    """Remaining-cost estimate of a cluster's best sub-state.

    Explored nodes expose their heap minimum's h; unexplored ones fall
    back to the heuristic; an explored-but-empty node poisons its parent
    with +inf (no completion exists through it).
    """
    if is_singleton(cluster):
        return 0.0
    nd = trellis.node(cluster)
    if nd.queue is None:
        return ev.heuristic(cluster)
    if not nd.queue:
        return math.inf
    return nd.queue[0].h


def compute_g(
    left: Cluster,
    right: Cluster,
    trellis: Trellis,
    model: CostModel,
    ctx: DatasetContext,
    ev: Optional[Evaluator] = None,
) -> float:
    """g of the partial tree rooted at left|right: psi plus child sub-state costs."""
    ev = ev or Evaluator(model, ctx)
    return ev.psi(left, right) + _g_best(trellis, left) + _g_best(trellis, right)


def compute_h(
    left: Cluster,
    right: Cluster,
    trellis: Trellis,
    model: CostModel,
    ctx: DatasetContext,
    ev: Optional[Evaluator] = None,
) -> float:
    """h of the partial tree rooted at left|right: summed leaf estimates."""
    ev = ev or Evaluator(model, ctx)
    return _h_best(trellis, left, ev) + _h_best(trellis, right, ev)


def explore_leaves(
    trellis: Trellis,
    frontier: list[Cluster],
    model: CostModel,
    ctx: DatasetContext,
    *,
    extender=None,
    rng: Optional[np.random.Generator] = None,
    stats: Optional[SearchStats] = None,
    ev: Optional[Evaluator] = None,
) -> None:
    """Instantiate the queue of each frontier node.

    Candidates are the node's trellis children; with an extender on a
    sparse trellis, freshly sampled splits are recorded and enqueued
    alongside them.
    """
    ev = ev or Evaluator(model, ctx)
    stats = stats if stats is not None else SearchStats()
    for cluster in frontier:
        nd = trellis.node(cluster)
        if nd.queue is not None:
            raise DomainError(f"frontier node {cluster:#x} is already explored")
        if is_singleton(cluster):
            raise DomainError("singleton nodes cannot be explored")
        if extender is not None and not trellis.full:
            from .construct import sample_splits

            for left, right in sample_splits(cluster, extender, model, ctx, rng):
                trellis.record_split(cluster, left, right)
        entries = []
        for left, right in trellis.children_pairs(cluster):
            if not trellis.full:
                # children of recorded splits must themselves be nodes
                trellis.ensure_node(left)
                trellis.ensure_node(right)
            g = compute_g(left, right, trellis, model, ctx, ev)
            h = compute_h(left, right, trellis, model, ctx, ev)
            entries.append(make_entry(g, h, left, right))
        heapq.heapify(entries)
        nd.queue = entries
        stats.nodes_explored += 1
        stats.heap_pushes += len(entries)


def propagate_updates(
    trellis: Trellis,
    state: PartialHierarchy,
    model: CostModel,
    ctx: DatasetContext,
    *,
    stats: Optional[SearchStats] = None,
    ev: Optional[Evaluator] = None,
) -> None:
    """Re-score the heap minimum of every state node, leaves to root.

    Pops the top entry, recomputes its (g, h) from the children's current
    queues, and re-enqueues it; the recomputed entry may rise or fall.
    """
    ev = ev or Evaluator(model, ctx)
    stats = stats if stats is not None else SearchStats()
    for cluster in sorted(state.clusters, key=lambda c: c.bit_count()):
        if is_singleton(cluster):
            continue
        nd = trellis.node(cluster)
        if not nd.queue:
            continue
        entry = nd.pop()
        stats.heap_pops += 1
        g = compute_g(entry.left, entry.right, trellis, model, ctx, ev)
        h = compute_h(entry.left, entry.right, trellis, model, ctx, ev)
        nd.push(make_entry(g, h, entry.left, entry.right))
        stats.heap_pushes += 1


def astar_search(
    trellis: Trellis,
    model: CostModel,
    ctx: DatasetContext,
    extender=None,
    *,
    rng: Optional[np.random.Generator] = None,
    max_iterations: Optional[int] = None,
    count_trees: bool = True,
) -> SearchResult:
    """Run the A* loop to the lowest-cost hierarchy the trellis represents.

    On a full trellis with an admissible heuristic the result is the
    global optimum; on a sparse trellis it is the minimum over the
    represented trees, extended on the fly when an extender is given.
    """
    if trellis.root != (1 << ctx.n) - 1:
        raise DomainError("trellis root does not cover the dataset's element set")
    stats = SearchStats()
    ev = Evaluator(model, ctx)
    start = time.perf_counter()
    if extender is not None and rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(extender.rng_seed))

    if ctx.n == 1:
        tree = Hierarchy.single_element()
        stats.wall_time = time.perf_counter() - start
        stats.trees_in_trellis_log10 = 0.0
        return SearchResult(0.0, tree, stats)

    while True:
        stats.iterations += 1
        cap = max_iterations if max_iterations is not None else max(1000, 10 * len(trellis))
        if stats.iterations > cap:
            raise SearchExhaustedError(
                f"no goal after {stats.iterations - 1} iterations "
                f"(cap {cap}); suspect an ill-behaved heuristic"
            )
        state = extract_state(trellis)
        root_node = trellis.node(trellis.root)

        if state.is_complete and root_node.queue:
            top = root_node.queue[0]
            if top.h == 0.0:
                if not math.isfinite(top.f):
                    raise SearchExhaustedError(
                        "every hierarchy represented by the trellis has infinite cost"
                    )
                tree = Hierarchy(ctx.n, state.clusters)
                recomputed = ev.tree_cost(tree)
                if abs(recomputed - top.f) <= GOAL_COST_RTOL * max(1.0, abs(top.f)):
                    stats.wall_time = time.perf_counter() - start
                    if count_trees:
                        stats.trees_in_trellis_log10 = count_trees_log10(trellis)
                    return SearchResult(top.f, tree, stats)
                # A stale minimum surfaced with h == 0; fall through and
                # let the update pass re-score the state until no drift
                # remains.

        if state.frontier:
            explore_leaves(
                trellis,
                state.frontier,
                model,
                ctx,
                extender=extender,
                rng=rng,
                stats=stats,
                ev=ev,
            )
        elif not state.is_complete:
            # Only dead ends remain on the state: if even the root's best
            # value is +inf there is nothing left to route around.
            if root_node.queue and not math.isfinite(root_node.queue[0].f):
                raise SearchExhaustedError(
                    "a reachable node has no recorded split and no extender is set"
                )
        propagate_updates(trellis, state, model, ctx, stats=stats, ev=ev)


def explore_all(
    trellis: Trellis, model: CostModel, ctx: DatasetContext
) -> SearchStats:
    """Exhaustively explore every node of a full trellis, smallest first.

    Children are instantiated before parents, so every entry is exact on
    creation.  Used by the counter-bound checks; the search itself never
    needs this.
    """
    if not trellis.full:
        raise DomainError("explore_all requires a full trellis")
    stats = SearchStats()
    ev = Evaluator(model, ctx)
    by_size: list[Cluster] = []
    for mask in range(1, trellis.root + 1):
        if mask & ~trellis.root == 0 and not is_singleton(mask):
            by_size.append(mask)
    by_size.sort(key=lambda c: c.bit_count())
    explore_leaves(trellis, by_size, model, ctx, stats=stats, ev=ev)
    return stats


def total_heap_entries(trellis: Trellis) -> int:
    return sum(
        len(nd.queue) for nd in trellis._nodes.values() if nd.queue is not None
    )


def count_trees_log10(trellis: Trellis) -> float:
    """log10 of the number of hierarchies representable by explored queues.

    N(singleton) = 1; N(c) = sum over c's queue entries of N(left) *
    N(right); unexplored non-singletons contribute 0.  Computed in log
    space, clusters in increasing size so children resolve first.
    """
    explored = [
        nd for nd in trellis._nodes.values() if nd.queue is not None and nd.queue
    ]
    explored.sort(key=lambda nd: nd.cluster.bit_count())
    log10n: dict[Cluster, float] = {}

    def value(cluster: Cluster) -> float:
        if is_singleton(cluster):
            return 0.0
        return log10n.get(cluster, float("-inf"))

    for nd in explored:
        terms = []
        for entry in nd.queue:
            t = value(entry.left) + value(entry.right)
            if t != float("-inf"):
                terms.append(t)
        if not terms:
            continue
        m = max(terms)
        log10n[nd.cluster] = m + math.log10(
            sum(10.0 ** (t - m) for t in terms)
        )
    return value(trellis.root)
