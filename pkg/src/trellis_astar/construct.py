"""Sparse-trellis construction: seeding from trees, run-time extension, rounds.

A sparse trellis starts from whatever hierarchies are already in hand
(beam search output, a greedy tree, nothing but the root) and grows
while the search runs: every time a node is explored, a pool of
candidate splits is sampled uniformly and either the k cheapest (best-k)
or k picked proportionally to exp(-psi) (importance) are recorded
alongside the pre-existing candidates.  Every tree used for seeding
stays representable, so the search result can only match or beat it.

Iterating the search keeps the grown trellis and, between rounds,
perturbs the incumbent solution by injecting freshly sampled splits at
every internal node of the current best tree; since the trellis only
ever grows, the per-round costs are non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    Cluster,
    CostModel,
    DatasetContext,
    DomainError,
    Hierarchy,
    is_singleton,
    iter_elements,
)
from .search import (
    Evaluator,
    SearchResult,
    astar_search,
    compute_g,
    compute_h,
)
from .trellis import Trellis, make_entry, sparse_trellis, split_count

SAMPLER_MODES = ("best_k", "importance")


@dataclass(frozen=True)
class Extender:
    """Run-time extension policy for one search."""

    mode: str = "best_k"
    k: int = 5
    pool: int = 1000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in SAMPLER_MODES:
            raise DomainError(f"sampler mode must be one of {SAMPLER_MODES}")
        if not 1 <= self.k <= self.pool:
            raise DomainError(f"need 1 <= k <= pool, got k={self.k}, pool={self.pool}")


def _uniform_candidate_splits(
    cluster: Cluster, pool: int, rng: np.random.Generator
) -> list[tuple[Cluster, Cluster]]:
    """Distinct canonical splits of a cluster, uniform without replacement."""
    members = list(iter_elements(cluster))
    k = len(members)
    total = split_count(k)
    if total <= 2 * pool:
        # cheap enough to enumerate; subsample if still over the pool
        low_removed = cluster & (cluster - 1)
        all_splits = []
        s = low_removed
        while s:
            other = cluster ^ s
            all_splits.append((s, other) if s < other else (other, s))
            s = (s - 1) & low_removed
        if len(all_splits) <= pool:
            return sorted(all_splits)
        idx = rng.choice(len(all_splits), size=pool, replace=False)
        return sorted(all_splits[i] for i in idx)
    # wide cluster: draw random member bit-patterns, canonicalize, dedup
    seen: set[tuple[Cluster, Cluster]] = set()
    attempts = 0
    limit = 200 * pool
    while len(seen) < pool and attempts < limit:
        attempts += 1
        bits = rng.integers(0, 2, size=k)
        s = 0
        for b, m in zip(bits, members):
            if b:
                s |= 1 << m
        if s == 0 or s == cluster:
            continue
        other = cluster ^ s
        seen.add((s, other) if s < other else (other, s))
    return sorted(seen)


def sample_splits(
    cluster: Cluster,
    ext: Extender,
    model: CostModel,
    ctx: DatasetContext,
    rng: np.random.Generator,
    ev: Optional[Evaluator] = None,
) -> list[tuple[Cluster, Cluster]]:
    """Pick the extender's k splits of a cluster from a uniform candidate pool."""
    if is_singleton(cluster):
        raise DomainError("cannot sample splits of a singleton")
    ev = ev or Evaluator(model, ctx)
    candidates = _uniform_candidate_splits(cluster, ext.pool, rng)
    if len(candidates) <= ext.k:
        return candidates
    scored = [(ev.psi(l, r), l, r) for l, r in candidates]
    if ext.mode == "best_k":
        scored.sort()
        return [(l, r) for _, l, r in scored[: ext.k]]
    # importance: draw k without replacement, probability ~ exp(-psi)
    finite = [s for s in scored if np.isfinite(s[0])]
    if len(finite) <= ext.k:
        chosen = finite
    else:
        lo = min(s[0] for s in finite)
        weights = np.array([np.exp(-(s[0] - lo)) for s in finite])
        probs = weights / weights.sum()
        idx = rng.choice(len(finite), size=ext.k, replace=False, p=probs)
        chosen = [finite[i] for i in idx]
    return sorted((l, r) for _, l, r in chosen)


def init_from_trees(trees: list[Hierarchy], n: int) -> Trellis:
    """Sparse trellis containing every cluster and split of the input trees."""
    if not trees:
        raise DomainError("init_from_trees needs at least one tree")
    for tree in trees:
        if tree.n != n:
            raise DomainError(
                f"all trees must cover the same {n} elements, got one over {tree.n}"
            )
    trellis = sparse_trellis(n)
    for tree in trees:
        for parent, (left, right) in tree.children.items():
            trellis.record_split(parent, left, right)
        for c in tree.clusters:
            trellis.ensure_node(c)
    return trellis


def _round_rng(ext: Extender, round_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([ext.rng_seed, round_index]))


def _inject_tree_perturbations(
    trellis: Trellis,
    tree: Hierarchy,
    model: CostModel,
    ctx: DatasetContext,
    ext: Extender,
    rng: np.random.Generator,
) -> None:
    """Sample fresh candidate splits at every internal node of a tree.

    Explored nodes get novel splits pushed onto their live queues;
    unexplored ones just record them for exploration time.
    """
    ev = Evaluator(model, ctx)
    for parent in sorted(tree.children, key=lambda c: c.bit_count()):
        node = trellis.ensure_node(parent)
        for left, right in sample_splits(parent, ext, model, ctx, rng, ev):
            already = node.recorded is not None and (left, right) in node.recorded
            trellis.record_split(parent, left, right)
            if node.queue is not None and not already:
                g = compute_g(left, right, trellis, model, ctx, ev)
                h = compute_h(left, right, trellis, model, ctx, ev)
                node.push(make_entry(g, h, left, right))


def iterative_search(
    trellis: Trellis,
    model: CostModel,
    ctx: DatasetContext,
    rounds: int,
    ext: Extender,
) -> list[SearchResult]:
    """Repeated search on a growing trellis; costs are non-increasing.

    Each round reuses the trellis grown so far, re-seeds the sampler, and
    (after the first round) perturbs the incumbent best tree at every
    level before searching again.
    """
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    results: list[SearchResult] = []
    for r in range(rounds):
        rng = _round_rng(ext, r)
        if results:
            _inject_tree_perturbations(trellis, results[-1].tree, model, ctx, ext, rng)
        results.append(astar_search(trellis, model, ctx, extender=ext, rng=rng))
    return results


def approx_search(
    model: CostModel,
    ctx: DatasetContext,
    ext: Extender,
    *,
    rounds: int = 1,
    init: str = "greedy",
    beam_width: Optional[int] = None,
) -> list[SearchResult]:
    """Approximate pipeline: seed a sparse trellis, then extend-and-search.

    init picks the seeding trees: "beam" uses the whole final beam,
    "greedy" the single greedy tree, "none" starts from the bare root.
    Returns the per-round results (non-increasing costs), last is best.
    """
    from .baselines import beam_search, greedy

    if init == "beam":
        _, pool = beam_search(model, ctx, beam_width, keep_pool=True)
        trellis = init_from_trees(pool, ctx.n)
    elif init == "greedy":
        trellis = init_from_trees([greedy(model, ctx).tree], ctx.n)
    elif init == "none":
        trellis = sparse_trellis(ctx.n)
    else:
        raise DomainError(f"unknown init {init!r}; choose beam, greedy or none")
    return iterative_search(trellis, model, ctx, rounds, ext)
