"""Reference algorithms: greedy agglomeration, beam search, exhaustive oracle.

The oracle walks the canonical recursive-partition parse of tree space
(always split off the side holding the smallest element), under which
every distinct binary hierarchy over a cluster appears exactly once and
the tree count obeys count(c) = sum over splits of count(L) * count(R),
i.e. (2n-3)!! at the root.  Sub-results are memoized per cluster, which
collapses the walk to one visit per (subset, split) without changing
what is counted or minimized; `iter_hierarchies` materializes the same
parse tree by tree for cross-checks at small n.

Beam search is level-synchronous over partial clusterings (sets of
active clusters, all states at one level having merged the same number
of times).  States whose accumulated costs coincide within 1e-12 are
collapsed to the first in deterministic order: orderings of one
hierarchy accumulate identical costs, so the dedup mostly removes
permutations of the same tree.
"""

from __future__ import annotations

import math
import time
from typing import Iterator, Optional

from .core import (
    CapacityError,
    Cluster,
    CostModel,
    DatasetContext,
    DomainError,
    Hierarchy,
    SearchExhaustedError,
    full_mask,
    is_singleton,
)
from .search import Evaluator, SearchResult, SearchStats

ORACLE_MAX_N = 10
BEAM_DEDUP_TOL = 1e-12


def double_factorial_trees(n: int) -> int:
    """(2n-3)!!: the number of binary hierarchies over n elements."""
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    count = 1
    for k in range(3, 2 * n - 2, 2):
        count *= k
    return count


# ---------------------------------------------------------------------------
# Greedy agglomeration
# ---------------------------------------------------------------------------


def greedy(model: CostModel, ctx: DatasetContext) -> SearchResult:
    """Merge the cheapest active pair until one cluster remains.

    Ties break on the (left, right) cluster order, left < right.
    """
    start = time.perf_counter()
    ev = Evaluator(model, ctx)
    n = ctx.n
    stats = SearchStats()
    if n == 1:
        stats.wall_time = time.perf_counter() - start
        return SearchResult(0.0, Hierarchy.single_element(), stats)
    active = [1 << i for i in range(n)]
    clusters = set(active)
    total = 0.0
    while len(active) > 1:
        best = None
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                a, b = active[i], active[j]
                if a > b:
                    a, b = b, a
                key = (ev.psi(a, b), a, b)
                if best is None or key < best:
                    best = key
        cost, a, b = best
        total += cost
        active = [c for c in active if c != a and c != b]
        merged = a | b
        active.append(merged)
        clusters.add(merged)
    stats.wall_time = time.perf_counter() - start
    return SearchResult(total, Hierarchy(n, clusters), stats)


# ---------------------------------------------------------------------------
# Beam search
# ---------------------------------------------------------------------------


def default_beam_width(n: int) -> int:
    """1000 for more than 40 elements, n(n-1)/2 otherwise."""
    return 1000 if n > 40 else n * (n - 1) // 2


class _BeamState:
    __slots__ = ("cost", "active", "clusters")

    def __init__(self, cost: float, active: tuple, clusters: frozenset) -> None:
        self.cost = cost
        self.active = active  # sorted tuple of active cluster masks
        self.clusters = clusters  # every cluster created so far


def beam_search(
    model: CostModel,
    ctx: DatasetContext,
    width: Optional[int] = None,
    *,
    dedupe: bool = True,
    keep_pool: bool = False,
) -> SearchResult | tuple[SearchResult, list[Hierarchy]]:
    """Level-synchronous beam over partial clusterings.

    Each level expands every beam state by every active-pair merge,
    optionally collapses cost-duplicates, and keeps the `width` cheapest.
    With keep_pool=True also returns every complete tree left in the
    final beam (used to seed sparse trellises).
    """
    start = time.perf_counter()
    n = ctx.n
    if width is None:
        width = default_beam_width(n)
    if width < 1:
        raise DomainError(f"beam width must be >= 1, got {width}")
    ev = Evaluator(model, ctx)
    stats = SearchStats()
    if n == 1:
        result = SearchResult(0.0, Hierarchy.single_element(), stats)
        stats.wall_time = time.perf_counter() - start
        return (result, [result.tree]) if keep_pool else result

    singletons = tuple(sorted(1 << i for i in range(n)))
    beam = [_BeamState(0.0, singletons, frozenset(singletons))]
    for _ in range(n - 1):
        candidates = []
        for state in beam:
            act = state.active
            for i in range(len(act)):
                for j in range(i + 1, len(act)):
                    a, b = act[i], act[j]
                    cost = state.cost + ev.psi(a, b)
                    candidates.append((cost, (a, b), state, a | b))
        # deterministic order: cost, then the merged pair, then the state
        candidates.sort(key=lambda c: (c[0], c[1], c[2].active))
        kept = []
        last_cost = None
        for cost, pair, state, merged in candidates:
            if dedupe and last_cost is not None and abs(cost - last_cost) <= BEAM_DEDUP_TOL:
                continue
            last_cost = cost
            kept.append((cost, pair, state, merged))
            if len(kept) == width:
                break
        beam = [
            _BeamState(
                cost,
                tuple(sorted([c for c in state.active if c not in pair] + [merged])),
                state.clusters | {merged},
            )
            for cost, pair, state, merged in kept
        ]
    best = beam[0]
    result = SearchResult(best.cost, Hierarchy(n, best.clusters), stats)
    stats.wall_time = time.perf_counter() - start
    if keep_pool:
        return result, [Hierarchy(n, s.clusters) for s in beam]
    return result


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------


def _canonical_splits(cluster: Cluster) -> Iterator[tuple[Cluster, Cluster]]:
    """Two-partitions of a cluster with the smallest element pinned left."""
    low = cluster & -cluster
    rest = cluster ^ low
    s = rest
    while True:
        s = (s - 1) & rest  # walks every proper submask of rest, ending at 0
        left = low | s
        yield left, cluster ^ left
        if s == 0:
            break


def iter_hierarchies(cluster: Cluster) -> Iterator[frozenset]:
    """Every binary hierarchy over a cluster, as a frozenset of clusters."""
    if is_singleton(cluster):
        yield frozenset((cluster,))
        return
    for left, right in _canonical_splits(cluster):
        for lh in iter_hierarchies(left):
            for rh in iter_hierarchies(right):
                yield lh | rh | {cluster}


def _subset_dp(
    model: CostModel, ctx: DatasetContext, *, want_count: bool
) -> tuple[float, Hierarchy, int]:
    ev = Evaluator(model, ctx)
    root = full_mask(ctx.n)
    memo: dict[Cluster, tuple[float, Optional[tuple[Cluster, Cluster]], int]] = {}

    def solve(cluster: Cluster) -> tuple[float, Optional[tuple[Cluster, Cluster]], int]:
        hit = memo.get(cluster)
        if hit is not None:
            return hit
        if is_singleton(cluster):
            res = (0.0, None, 1)
        else:
            best = None  # (cost, canonical left, canonical right)
            count = 0
            for left, right in _canonical_splits(cluster):
                lc, _, ln = solve(left)
                rc, _, rn = solve(right)
                if want_count:
                    count += ln * rn
                cost = ev.psi(left, right) + lc + rc
                if left > right:
                    left, right = right, left
                if best is None or (cost, left) < (best[0], best[1]):
                    best = (cost, left, right)
            res = (best[0], (best[1], best[2]), count)
        memo[cluster] = res
        return res

    cost, _, count = solve(root)
    clusters = []
    stack = [root]
    while stack:
        c = stack.pop()
        clusters.append(c)
        split = memo[c][1]
        if split is not None:
            stack.extend(split)
    if not math.isfinite(cost):
        raise SearchExhaustedError("every hierarchy has infinite cost")
    return cost, Hierarchy(ctx.n, clusters), count


def brute_force_map(
    model: CostModel, ctx: DatasetContext
) -> tuple[SearchResult, int]:
    """Minimum tree cost over all (2n-3)!! hierarchies, plus that count.

    Hard-capped at n = 10 (34,459,425 trees); each hierarchy is accounted
    exactly once by the canonical-partition recursion.
    """
    if ctx.n > ORACLE_MAX_N:
        raise CapacityError(f"oracle is capped at n = {ORACLE_MAX_N}, got {ctx.n}")
    start = time.perf_counter()
    if ctx.n == 1:
        stats = SearchStats(wall_time=time.perf_counter() - start)
        return SearchResult(0.0, Hierarchy.single_element(), stats), 1
    cost, tree, count = _subset_dp(model, ctx, want_count=True)
    stats = SearchStats(wall_time=time.perf_counter() - start)
    return SearchResult(cost, tree, stats), count


def exact_trellis_map(
    model: CostModel, ctx: DatasetContext, *, max_n: int = 18
) -> SearchResult:
    """Subset dynamic program over the full powerset (the pre-search exact method).

    Same optimum as the full-trellis search; kept as an independent
    reference for sizes past the enumeration oracle's cap.
    """
    if ctx.n > max_n:
        raise CapacityError(f"subset DP capped at n = {max_n}, got {ctx.n}")
    start = time.perf_counter()
    if ctx.n == 1:
        stats = SearchStats(wall_time=time.perf_counter() - start)
        return SearchResult(0.0, Hierarchy.single_element(), stats)
    cost, tree, _ = _subset_dp(model, ctx, want_count=False)
    stats = SearchStats(wall_time=time.perf_counter() - start)
    return SearchResult(cost, tree, stats)
