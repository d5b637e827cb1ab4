"""Toy jet-shower objective: splitting likelihood, heuristics, generator.

A jet event is a list of leaf four-vectors [E, px, py, pz] plus the
model constants lambda (decay rate) and t_cut (stopping threshold on the
squared mass t = E^2 - |p|^2).  A cluster's four-vector is the sum of
its member leaves; parents therefore always carry the sum of their
children.

The cost of a split (L, R) under parent P = L u R with squared mass t_P
is the negative log of one likelihood factor per child:

  * non-singleton child with mass t:   (1/(1-e^-lam)) (lam/t_P) e^(-lam t / t_P)
  * singleton child (leaf):            (1/(1-e^-lam)) (1 - e^(-lam t_cut / t_P))

the second being the integral of the first from 0 to t_cut.  Splitting
stops below the threshold, so any parent with t_P <= t_cut gets infinite
cost, as does a non-singleton child with t outside (0, t_P).  Densities
can exceed 1, so costs may be negative.

The two heuristics bound the log-likelihood of any hierarchy over a
cluster from above (hence its cost from below) by bounding, level by
level of a maximally unbalanced-to-balanced tree, the masses that can
appear: h0 is the admissible variant, h1 trades the guarantee for a
tighter (larger) denominator bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .core import (
    BadInputError,
    Cluster,
    DomainError,
    Hierarchy,
    is_singleton,
    iter_elements,
    mask_of,
)

# exponent floor: exp() underflows to 0 below about -745
EXP_FLOOR = -745.0


def _log1mexp(x: float) -> float:
    """log(1 - e^-x) for x > 0, stable at both ends."""
    if x <= 0.0:
        raise DomainError(f"log(1 - e^-x) requires x > 0, got {x}")
    if x < math.log(2.0):
        return math.log(-math.expm1(-x))
    if x > -EXP_FLOOR:
        return 0.0
    return math.log1p(-math.exp(-x))


def four_vector_t(v: np.ndarray) -> float:
    """Squared mass of a four-vector [E, px, py, pz]."""
    return float(v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3])


@dataclass
class JetEvent:
    """Leaf four-vectors plus the shower constants.

    Immutable after creation; the per-cluster vector/mass caches and the
    pairwise-mass table are idempotent memos.
    """

    leaves: np.ndarray  # (n, 4) rows [E, px, py, pz]
    lam: float
    t_cut: float
    truth: Optional[Hierarchy] = None
    _vec: dict = field(default_factory=dict, repr=False, compare=False)
    _t: dict = field(default_factory=dict, repr=False, compare=False)
    _tables: dict = field(default_factory=dict, repr=False, compare=False)
    _pair_t: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        leaves = np.asarray(self.leaves, dtype=float)
        if leaves.ndim != 2 or leaves.shape[1] != 4 or leaves.shape[0] < 1:
            raise DomainError("leaves must be a nonempty (n, 4) array")
        if not np.all(np.isfinite(leaves)):
            raise DomainError("leaf four-vectors must be finite")
        if self.lam <= 0.0:
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if self.t_cut <= 0.0:
            raise DomainError(f"t_cut must be positive, got {self.t_cut}")
        self.leaves = leaves

    @property
    def n(self) -> int:
        return self.leaves.shape[0]

    def vector(self, cluster: Cluster) -> np.ndarray:
        """Four-vector of a cluster: sum of member leaves."""
        v = self._vec.get(cluster)
        if v is None:
            rest = cluster & (cluster - 1)
            i = (cluster & -cluster).bit_length() - 1
            v = self.leaves[i] if rest == 0 else self.vector(rest) + self.leaves[i]
            self._vec[cluster] = v
        return v

    def t(self, cluster: Cluster) -> float:
        val = self._t.get(cluster)
        if val is None:
            val = four_vector_t(self.vector(cluster))
            self._t[cluster] = val
        return val

    def pair_t(self) -> np.ndarray:
        """n x n table of two-leaf squared masses (diagonal unused)."""
        if self._pair_t is None:
            e = self.leaves[:, 0]
            p = self.leaves[:, 1:]
            esum = e[:, None] + e[None, :]
            psum = p[:, None, :] + p[None, :, :]
            self._pair_t = esum * esum - np.einsum("ijk,ijk->ij", psum, psum)
        return self._pair_t


# ---------------------------------------------------------------------------
# Splitting cost
# ---------------------------------------------------------------------------


def split_nll(left: Cluster, right: Cluster, event: JetEvent) -> float:
    """Negative log-likelihood of splitting left|right into (left, right).

    Infinite when the parent mass is at or below the stopping threshold
    (such a parent never splits) or a non-singleton child's mass falls
    outside the parent's support (0, t_P).
    """
    lam = event.lam
    t_p = event.t(left | right)
    if t_p <= event.t_cut:
        return math.inf
    log_z = _log1mexp(lam)  # log(1 - e^-lam)
    nll = 0.0
    for child in (left, right):
        if is_singleton(child):
            # integrated leaf factor
            nll += log_z - _log1mexp(lam * event.t_cut / t_p)
        else:
            t_c = event.t(child)
            if t_c <= 0.0 or t_c >= t_p:
                return math.inf
            nll += log_z - math.log(lam) + math.log(t_p) + lam * t_c / t_p
    return nll


# ---------------------------------------------------------------------------
# Heuristic tables
# ---------------------------------------------------------------------------


class GinkgoHeuristicTables(NamedTuple):
    """Per-cluster quantities feeding both heuristics.

    t_min[i]: smallest two-member mass above t_cut that element i can
    form inside the cluster (t_cut when none); sorted ascending.
    t_p0: smallest t_min entry above t_cut (t_cut fallback).
    t_tilde: smallest leaf mass in the cluster.
    t_bound: level-by-level lower bounds on internal-node masses, length
    max(k - 2, 0) for a size-k cluster.
    """

    t_root: float
    t_min: tuple
    t_p0: float
    t_tilde: float
    t_bound: tuple
    leaf_ts: tuple


def lower_bound_t(t_min, t_p0: float, t_tilde: float, n: int) -> list[float]:
    """Level-wise lower bounds on internal masses for a full binary tree.

    Seeds with the n//2 smallest pair bounds (the bottom level pairs up
    as many elements as possible), then walks up: a level with j nodes
    above it contributes j//2 entries, each bounded by the least mass a
    branch of i elements can carry.
    """
    if n < 2:
        raise DomainError(f"lower_bound_t needs n >= 2, got {n}")
    t_min = sorted(t_min)
    if len(t_min) != n:
        raise DomainError("t_min must have one entry per element")
    out = list(t_min[: n // 2])
    i = 3
    j = n % 2 + n // 2
    while len(out) < n - 2:
        out.extend([t_tilde * (i % 2) + t_p0 * (i // 2)] * (j // 2))
        j = j % 2 + j // 2
        i += 1
        if j <= 1 and len(out) < n - 2:  # unreachable; guards the halving recurrence
            raise DomainError("level recurrence stalled before reaching n - 2 entries")
    return out[: max(n - 2, 0)]


def heuristic_tables(cluster: Cluster, event: JetEvent) -> GinkgoHeuristicTables:
    tabs = event._tables.get(cluster)
    if tabs is not None:
        return tabs
    members = list(iter_elements(cluster))
    k = len(members)
    t_cut = event.t_cut
    leaf_ts = tuple(max(event.t(1 << i), 0.0) for i in members)
    pair = event.pair_t()[np.ix_(members, members)]
    t_min = []
    for a in range(k):
        best = math.inf
        row = pair[a]
        for b in range(k):
            if b != a and row[b] > t_cut and row[b] < best:
                best = row[b]
        t_min.append(best if math.isfinite(best) else t_cut)
    t_min.sort()
    t_p0 = next((v for v in t_min if v > t_cut), t_cut)
    t_tilde = min(leaf_ts)
    t_bound = tuple(lower_bound_t(t_min, t_p0, t_tilde, k)) if k >= 2 else ()
    tabs = GinkgoHeuristicTables(
        t_root=event.t(cluster),
        t_min=tuple(t_min),
        t_p0=t_p0,
        t_tilde=t_tilde,
        t_bound=t_bound,
        leaf_ts=leaf_ts,
    )
    event._tables[cluster] = tabs
    return tabs


def _ginkgo_bound(cluster: Cluster, event: JetEvent, admissible: bool) -> float:
    """Common h0/h1 body: minus an upper bound on any hierarchy's log-likelihood."""
    if is_singleton(cluster):
        return 0.0
    tabs = heuristic_tables(cluster, event)
    lam, t_cut = event.lam, event.t_cut
    if tabs.t_root <= t_cut:
        # no finite-cost tree exists over this cluster; any value is a bound
        return 0.0
    log_z = _log1mexp(lam)
    max_leaf_t = max(tabs.leaf_ts)

    # internal nodes: one factor per non-root internal node (k - 2 of them)
    log_bound = 0.0
    for tb in tabs.t_bound:
        if admissible:
            # parent of an internal node holds at least one more element
            den = tb if tb < max_leaf_t else tb + tabs.t_tilde
        else:
            den = tb + 2.0 * tabs.t_p0
        log_bound += math.log(lam) - log_z - math.log(den) - lam * tb / tabs.t_root

    # leaves: integrated factor with the parent mass bounded below;
    # children may be sampled last, shaving the sibling's mass off the
    # parent, except for the heaviest element which keeps the full bound.
    heaviest = max(range(len(tabs.leaf_ts)), key=lambda a: tabs.leaf_ts[a])
    sq_p0 = math.sqrt(tabs.t_p0)
    for a, t_i in enumerate(tabs.leaf_ts):
        if a == heaviest:
            t_pi = tabs.t_p0
        else:
            d = sq_p0 - math.sqrt(t_i)
            t_pi = d * d
        if t_pi <= 0.0:
            log_bound += -log_z  # limit of the integrated factor as t_P -> 0
        else:
            log_bound += -log_z + _log1mexp(lam * t_cut / t_pi)
    return -log_bound


def ginkgo_h0(cluster: Cluster, event: JetEvent) -> float:
    """Admissible lower bound on the minimal tree cost over a cluster."""
    return _ginkgo_bound(cluster, event, admissible=True)


def ginkgo_h1(cluster: Cluster, event: JetEvent) -> float:
    """Tighter but not provably admissible variant of ginkgo_h0."""
    return _ginkgo_bound(cluster, event, admissible=False)


# ---------------------------------------------------------------------------
# Event generation
# ---------------------------------------------------------------------------


def _sample_child_t(rng: np.random.Generator, t_p: float, lam: float, cap: float) -> float:
    """Inverse-CDF draw from the truncated exponential on (0, min(t_p, cap))."""
    z = -math.expm1(-lam)  # 1 - e^-lam
    if cap < t_p:
        u_max = -math.expm1(-lam * cap / t_p) / z
    else:
        u_max = 1.0
    u = rng.random() * u_max
    return -(t_p / lam) * math.log1p(-u * z)


def _two_body_split(
    parent: np.ndarray, t_p: float, t_l: float, t_r: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Split a four-vector into two of given masses, isotropic in its rest frame."""
    sq = math.sqrt(t_p)
    e_l = (t_p + t_l - t_r) / (2.0 * sq)
    e_r = (t_p + t_r - t_l) / (2.0 * sq)
    mom = math.sqrt(max(e_l * e_l - t_l, 0.0))
    cos = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    sin = math.sqrt(max(1.0 - cos * cos, 0.0))
    axis = np.array([sin * math.cos(phi), sin * math.sin(phi), cos])

    beta = parent[1:] / parent[0]
    b2 = float(beta @ beta)
    gamma = parent[0] / sq

    def boost(e_star: float, p_star: np.ndarray) -> np.ndarray:
        if b2 < 1e-30:
            return np.array([e_star, *p_star])
        bp = float(beta @ p_star)
        e = gamma * (e_star + bp)
        p = p_star + ((gamma - 1.0) * bp / b2 + gamma * e_star) * beta
        return np.array([e, *p])

    return boost(e_l, mom * axis), boost(e_r, -mom * axis)


def _sample_child_masses(
    rng: np.random.Generator, t_p: float, lam: float
) -> tuple[float, float]:
    """Draw both child masses from the splitting density, kinematically valid.

    Both are independent truncated-exponential draws; invalid pairs
    (children too heavy for a two-body decay) are rejected and redrawn.
    After a bounded number of rejections the second child is squeezed
    into the remaining range, keeping the generator total.
    """
    sq = math.sqrt(t_p)
    for _ in range(64):
        t_l = _sample_child_t(rng, t_p, lam, cap=t_p)
        t_r = _sample_child_t(rng, t_p, lam, cap=t_p)
        if math.sqrt(t_l) + math.sqrt(t_r) <= sq:
            return t_l, t_r
    t_l = _sample_child_t(rng, t_p, lam, cap=t_p)
    return t_l, _sample_child_t(rng, t_p, lam, cap=(sq - math.sqrt(t_l)) ** 2)


def _sample_event(
    rng: np.random.Generator, lam: float, t_root: float, t_cut: float, bail_above: int
) -> tuple[list[np.ndarray], object]:
    """One shower attempt; splitting stops early once leaves exceed bail_above."""
    leaves: list[np.ndarray] = []

    def shower(p4: np.ndarray, t: float):
        if t < t_cut or len(leaves) > bail_above:
            leaves.append(p4)
            return len(leaves) - 1
        t_l, t_r = _sample_child_masses(rng, t, lam)
        p_l, p_r = _two_body_split(p4, t, t_l, t_r, rng)
        return [shower(p_l, t_l), shower(p_r, t_r)]

    root_p4 = np.array([math.sqrt(t_root), 0.0, 0.0, 0.0])
    truth_nested = shower(root_p4, t_root)
    return leaves, truth_nested


def generate_jet(
    lam: float,
    t_root: float,
    t_cut: float,
    max_leaves: int,
    seed: int,
    *,
    max_attempts: int = 10_000,
) -> JetEvent:
    """Sample one jet: recursive two-body splits, stopping below t_cut.

    Child masses are drawn from the splitting density; the second child
    is restricted to the kinematically allowed range so that a two-body
    decay with the sampled masses always exists.  Events with more than
    max_leaves leaves are resampled.  Deterministic under seed; the truth
    hierarchy is attached to the returned event.
    """
    if lam <= 0.0 or t_cut <= 0.0 or t_cut >= t_root:
        raise DomainError("need lam > 0 and 0 < t_cut < t_root")
    if max_leaves < 2:
        raise DomainError("max_leaves must be at least 2 (the root always splits)")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(max_attempts):
        leaves, truth_nested = _sample_event(rng, lam, t_root, t_cut, max_leaves)
        if len(leaves) <= max_leaves:
            event = JetEvent(np.array(leaves), lam, t_cut)
            event.truth = truth_from_nested(truth_nested, event.n)
            return event
    raise DomainError(
        f"could not generate a jet with <= {max_leaves} leaves in {max_attempts} tries"
    )


def generate_jet_with_leaves(
    n: int,
    lam: float,
    t_root: float,
    t_cut: float,
    seed: int,
    *,
    max_attempts: int = 200_000,
) -> JetEvent:
    """Resample the shower until the jet has exactly n leaves."""
    if n < 2:
        raise DomainError("need n >= 2")
    if lam <= 0.0 or t_cut <= 0.0 or t_cut >= t_root:
        raise DomainError("need lam > 0 and 0 < t_cut < t_root")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(max_attempts):
        leaves, truth_nested = _sample_event(rng, lam, t_root, t_cut, n)
        if len(leaves) == n:
            event = JetEvent(np.array(leaves), lam, t_cut)
            event.truth = truth_from_nested(truth_nested, event.n)
            return event
    raise DomainError(f"no jet with exactly {n} leaves under seed {seed}")


# ---------------------------------------------------------------------------
# Truth-tree encoding and file format
# ---------------------------------------------------------------------------


def truth_from_nested(nested, n: int) -> Hierarchy:
    """Nested [left, right] pairs with integer leaf ids -> Hierarchy."""
    clusters: list[Cluster] = []

    def walk(node) -> Cluster:
        if isinstance(node, int):
            m = 1 << node
        else:
            if len(node) != 2:
                raise BadInputError("truth tree nodes must be leaf ids or pairs")
            m = walk(node[0]) | walk(node[1])
        clusters.append(m)
        return m

    walk(nested)
    return Hierarchy(n, clusters)


def truth_to_nested(tree: Hierarchy):
    def build(c: Cluster):
        if is_singleton(c):
            return c.bit_length() - 1
        left, right = tree.children[c]
        return [build(left), build(right)]

    return build(tree.root)


def save_jet(event: JetEvent, path) -> None:
    obj = {
        "lambda": event.lam,
        "t_cut": event.t_cut,
        "leaves": [[float(x) for x in row] for row in event.leaves],
    }
    if event.truth is not None:
        obj["truth_tree"] = truth_to_nested(event.truth)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_jet(path) -> JetEvent:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BadInputError(f"{path}: not valid JSON: {exc}") from exc
    try:
        leaves = np.asarray(obj["leaves"], dtype=float)
        event = JetEvent(leaves, float(obj["lambda"]), float(obj["t_cut"]))
    except (KeyError, TypeError, ValueError, DomainError) as exc:
        raise BadInputError(f"{path}: invalid jet file: {exc}") from exc
    if "truth_tree" in obj:
        try:
            event.truth = truth_from_nested(obj["truth_tree"], event.n)
        except (DomainError, BadInputError) as exc:
            raise BadInputError(f"{path}: invalid truth_tree: {exc}") from exc
    return event
