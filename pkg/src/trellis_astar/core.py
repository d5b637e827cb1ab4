"""Shared domain types for hierarchical clustering over bit-set clusters.

Conventions used throughout the package:

  * A dataset of n elements is indexed 0..n-1.
  * A cluster is a nonempty subset of elements encoded as a Python int
    bitmask (bit i set <=> element i is a member).  Equality, hashing and
    the total order used for deterministic tie-breaking are all the plain
    integer ones.  Arbitrary-precision ints cover both the exact regime
    (n <= 128) and the approximate regime (n in the hundreds).
  * A hierarchy is a set of nested clusters: the full set, every
    singleton, and for every non-singleton member exactly two children
    that partition it.  A hierarchy over n elements has 2n - 1 clusters
    and n - 1 sibling pairs.
  * A cost model is a pair (psi, heuristic): psi scores one sibling pair,
    the heuristic lower-bounds the cost of any sub-tree over a cluster.
    The total tree cost is the sum of psi over all sibling pairs.  psi
    may be negative (log-densities) or +inf (impossible splits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Protocol


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class TrellisAstarError(Exception):
    """Base class for all package errors."""


class DomainError(TrellisAstarError):
    """A parameter or input value is outside its allowed domain."""


class BadInputError(TrellisAstarError):
    """An input file is malformed."""


class CapacityError(TrellisAstarError):
    """A requested structure exceeds a configured size cap."""


class MissingNodeError(TrellisAstarError):
    """A cluster was addressed that is not a node of the trellis."""


class SearchExhaustedError(TrellisAstarError):
    """The trellis represents no (finite-cost) complete hierarchy."""


class ObjectiveMismatchError(DomainError):
    """The dataset violates an assumption of the selected objective."""


# ---------------------------------------------------------------------------
# Cluster bitmask helpers
# ---------------------------------------------------------------------------

Cluster = int


def full_mask(n: int) -> Cluster:
    if n < 1:
        raise DomainError(f"element count must be >= 1, got {n}")
    return (1 << n) - 1


def mask_of(elements) -> Cluster:
    m = 0
    for i in elements:
        m |= 1 << i
    return m


def iter_elements(mask: Cluster) -> Iterator[int]:
    """Yield element indices of a cluster in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def elements_of(mask: Cluster) -> list[int]:
    return list(iter_elements(mask))


def is_singleton(mask: Cluster) -> bool:
    return mask != 0 and mask & (mask - 1) == 0


# ---------------------------------------------------------------------------
# Dataset context and cost model
# ---------------------------------------------------------------------------


class DatasetContext(Protocol):
    """Anything a cost model evaluates against.  Only `n` is shared."""

    n: int


@dataclass(frozen=True)
class CostModel:
    """One clustering objective: a sibling-pair cost and its heuristic.

    `psi(left, right, ctx)` must be symmetric in the two clusters.
    `heuristic(cluster, ctx)` must return 0.0 for singletons; it is
    admissible when it never exceeds the minimal sub-tree cost over the
    cluster (a property this package tests, not assumes).
    """

    name: str
    psi: Callable[[Cluster, Cluster, DatasetContext], float]
    heuristic: Callable[[Cluster, DatasetContext], float]
    heuristic_name: str = ""


def zero_heuristic(cluster: Cluster, ctx: DatasetContext) -> float:
    """Trivial heuristic; admissible for any objective with psi >= 0."""
    return 0.0


# ---------------------------------------------------------------------------
# Hierarchy
# ---------------------------------------------------------------------------


class Hierarchy:
    """A complete binary hierarchy over n elements, stored as cluster masks.

    Immutable after construction.  Construction validates the nesting
    invariants: the full set and all singletons are present, there are
    exactly 2n - 1 clusters, and every non-singleton cluster is the
    disjoint union of exactly two member clusters.
    """

    __slots__ = ("n", "clusters", "children")

    def __init__(self, n: int, clusters) -> None:
        self.n = n
        self.clusters = frozenset(clusters)
        self.children = self._validate()

    def _validate(self) -> dict[Cluster, tuple[Cluster, Cluster]]:
        n = self.n
        root = full_mask(n)
        if root not in self.clusters:
            raise DomainError("hierarchy is missing the full-set root")
        for i in range(n):
            if (1 << i) not in self.clusters:
                raise DomainError(f"hierarchy is missing singleton {{{i}}}")
        if len(self.clusters) != 2 * n - 1:
            raise DomainError(
                f"hierarchy over {n} elements must have {2 * n - 1} clusters, "
                f"got {len(self.clusters)}"
            )
        for c in self.clusters:
            if c == 0 or c & ~root:
                raise DomainError(f"cluster {c:#x} is not a subset of the element set")
        # Each non-root cluster hangs off its smallest strict superset.
        by_size = sorted(self.clusters, key=lambda c: (c.bit_count(), c))
        kids: dict[Cluster, list[Cluster]] = {}
        for idx, c in enumerate(by_size[:-1]):
            parent = None
            for cand in by_size[idx + 1 :]:
                if c & cand == c and c != cand:
                    parent = cand
                    break
            kids.setdefault(parent, []).append(c)
        children: dict[Cluster, tuple[Cluster, Cluster]] = {}
        for parent, cs in kids.items():
            cs = sorted(cs)
            if parent is None or len(cs) != 2 or cs[0] | cs[1] != parent or cs[0] & cs[1]:
                raise DomainError("hierarchy clusters do not nest into binary splits")
            children[parent] = (cs[0], cs[1])
        if len(children) != n - 1:
            raise DomainError("hierarchy does not have n - 1 binary splits")
        return children

    @property
    def root(self) -> Cluster:
        return full_mask(self.n)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Hierarchy)
            and self.n == other.n
            and self.clusters == other.clusters
        )

    def __hash__(self) -> int:
        return hash((self.n, self.clusters))

    def __repr__(self) -> str:
        return f"Hierarchy(n={self.n}, clusters={len(self.clusters)})"

    @classmethod
    def single_element(cls) -> "Hierarchy":
        return cls(1, [1])

    @classmethod
    def from_merges(cls, n: int, merges) -> "Hierarchy":
        """Build from a sequence of (left, right) cluster merges."""
        clusters = {1 << i for i in range(n)}
        for left, right in merges:
            clusters.add(left | right)
        return cls(n, clusters)

    def to_nested(self) -> dict:
        """Nested {"members": [...], "children": [...]} form (JSON-ready)."""

        def build(c: Cluster) -> dict:
            node = {"members": elements_of(c), "children": []}
            if c in self.children:
                left, right = self.children[c]
                node["children"] = [build(left), build(right)]
            return node

        return build(self.root)

    @classmethod
    def from_nested(cls, obj: dict) -> "Hierarchy":
        clusters = []

        def walk(node: dict) -> Cluster:
            members = node.get("members")
            kids = node.get("children", [])
            if not members:
                raise BadInputError("tree node without members")
            m = mask_of(members)
            clusters.append(m)
            if kids:
                if len(kids) != 2:
                    raise BadInputError("tree nodes must have 0 or 2 children")
                if walk(kids[0]) | walk(kids[1]) != m:
                    raise BadInputError("tree children do not partition their parent")
            return m

        root = walk(obj)
        return cls(root.bit_count(), clusters)


def sibling_pairs(h: Hierarchy) -> list[tuple[Cluster, Cluster]]:
    """All n - 1 sibling pairs, parents in increasing bit-pattern order."""
    return [h.children[p] for p in sorted(h.children)]


def tree_cost(h: Hierarchy, model: CostModel, ctx: DatasetContext) -> float:
    """Total cost of a hierarchy: sum of psi over its sibling pairs."""
    return sum(model.psi(left, right, ctx) for left, right in sibling_pairs(h))
