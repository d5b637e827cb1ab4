import math

import numpy as np
import pytest

import trellis_astar as ta
from trellis_astar.search import Evaluator

from conftest import random_signed_graph


def splits_are_sound(cluster, splits):
    seen = set()
    for left, right in splits:
        assert left & right == 0
        assert left | right == cluster
        assert 0 < left < right
        assert (left, right) not in seen
        seen.add((left, right))
    return True


class TestExtender:
    def test_validation(self):
        with pytest.raises(ta.DomainError):
            ta.Extender(mode="bogus")
        with pytest.raises(ta.DomainError):
            ta.Extender(k=10, pool=5)
        ext = ta.Extender()
        assert ext.mode == "best_k" and ext.k == 5 and ext.pool == 1000


class TestSampleSplits:
    def setup_method(self):
        self.g = random_signed_graph(6, 0)
        self.model = ta.make_cost_model("hcc")

    def test_full_pool_returns_every_split(self):
        cluster = 0b111100
        total = ta.split_count(4)
        ext = ta.Extender(k=total, pool=total)
        rng = np.random.default_rng(0)
        splits = ta.sample_splits(cluster, ext, self.model, self.g, rng)
        assert len(splits) == total
        assert splits_are_sound(cluster, splits)

    def test_best_k_one_returns_cheapest_of_pool(self):
        cluster = 0b011111
        total = ta.split_count(5)
        ext = ta.Extender(k=1, pool=total)
        rng = np.random.default_rng(1)
        (split,) = ta.sample_splits(cluster, ext, self.model, self.g, rng)
        ev = Evaluator(self.model, self.g)
        best = min((ev.psi(l, r), l, r) for l, r in ta.full_trellis(6).children_pairs(cluster))
        assert (split[0], split[1]) == (best[1], best[2])

    def test_deterministic_under_seed(self):
        cluster = (1 << 6) - 1
        ext = ta.Extender(k=3, pool=8)
        a = ta.sample_splits(cluster, ext, self.model, self.g, np.random.default_rng(42))
        b = ta.sample_splits(cluster, ext, self.model, self.g, np.random.default_rng(42))
        assert a == b

    def test_importance_mode_sound_and_deterministic(self):
        cluster = (1 << 6) - 1
        ext = ta.Extender(mode="importance", k=4, pool=12)
        a = ta.sample_splits(cluster, ext, self.model, self.g, np.random.default_rng(7))
        b = ta.sample_splits(cluster, ext, self.model, self.g, np.random.default_rng(7))
        assert a == b
        assert len(a) == 4
        assert splits_are_sound(cluster, a)

    def test_wide_cluster_random_patterns(self):
        # 2^(k-1)-1 far above the pool forces the random-bit-pattern path
        n = 40
        g = ta.SimilarityGraph(n, np.zeros((n, n)))
        cluster = (1 << n) - 1
        ext = ta.Extender(k=5, pool=50)
        splits = ta.sample_splits(
            cluster, ext, ta.make_cost_model("hcc"), g, np.random.default_rng(3)
        )
        assert len(splits) == 5
        assert splits_are_sound(cluster, splits)


class TestInitFromTrees:
    def test_single_tree_reproduces_its_cost(self):
        g = random_signed_graph(5, 1)
        model = ta.make_cost_model("hcc")
        base = ta.greedy(model, g)
        trellis = ta.init_from_trees([base.tree], 5)
        res = ta.astar_search(trellis, model, g)
        assert res.cost == pytest.approx(base.cost, rel=1e-9)
        assert res.tree == base.tree

    def test_two_trees_can_recombine(self):
        # trees sharing the root split contribute their sub-trees to the
        # same nodes, so the merged trellis represents at least both
        trees = [
            ta.Hierarchy.from_merges(
                4, [(0b0010, 0b0100), (0b0110, 0b1000), (0b0001, 0b1110)]
            ),
            ta.Hierarchy.from_merges(
                4, [(0b0010, 0b1000), (0b1010, 0b0100), (0b0001, 0b1110)]
            ),
        ]
        trellis = ta.init_from_trees(trees, 4)

        def representable(cluster):
            if cluster.bit_count() == 1:
                return 1
            recorded = trellis.node(cluster).recorded or ()
            return sum(representable(l) * representable(r) for l, r in recorded)

        assert representable(trellis.root) >= 2

    def test_all_fifteen_trees_reach_the_optimum(self):
        g = random_signed_graph(4, 3)
        model = ta.make_cost_model("hcc")
        trees = [ta.Hierarchy(4, clusters) for clusters in ta.iter_hierarchies(0b1111)]
        assert len(trees) == 15
        trellis = ta.init_from_trees(trees, 4)
        res = ta.astar_search(trellis, model, g)
        oracle, _ = ta.brute_force_map(model, g)
        assert res.cost == pytest.approx(oracle.cost, rel=1e-9)

    def test_errors(self):
        with pytest.raises(ta.DomainError):
            ta.init_from_trees([], 4)
        tree3 = ta.Hierarchy.from_merges(3, [(0b001, 0b010), (0b011, 0b100)])
        with pytest.raises(ta.DomainError):
            ta.init_from_trees([tree3], 4)


class TestIterativeSearch:
    def test_single_round_matches_plain_approx(self, jet_cache):
        ev = jet_cache(8, 50)
        model = ta.make_cost_model("ginkgo", "h1")
        ext = ta.Extender(k=4, pool=60, rng_seed=9)
        tree = ta.greedy(model, ev).tree
        a = ta.iterative_search(ta.init_from_trees([tree], 8), model, ev, 1, ext)
        b = ta.astar_search(
            ta.init_from_trees([tree], 8),
            model,
            ev,
            extender=ext,
            rng=np.random.default_rng(np.random.SeedSequence([ext.rng_seed, 0])),
        )
        assert len(a) == 1
        assert a[0].cost == pytest.approx(b.cost, rel=1e-12)

    def test_costs_non_increasing(self, jet_cache):
        model = ta.make_cost_model("ginkgo", "h1")
        for seed in range(3):
            ev = jet_cache(9, 60 + seed)
            ext = ta.Extender(k=3, pool=40, rng_seed=seed)
            tree = ta.greedy(model, ev).tree
            results = ta.iterative_search(
                ta.init_from_trees([tree], 9), model, ev, 4, ext
            )
            costs = [r.cost for r in results]
            for earlier, later in zip(costs, costs[1:]):
                assert later <= earlier + 1e-12

    def test_exhaustive_pool_converges_in_round_one(self):
        g = random_signed_graph(5, 4)
        model = ta.make_cost_model("hcc")
        total = ta.split_count(5)
        ext = ta.Extender(k=total, pool=total, rng_seed=1)
        results = ta.approx_search(model, g, ext, rounds=1, init="none")
        oracle, _ = ta.brute_force_map(model, g)
        assert results[0].cost == pytest.approx(oracle.cost, rel=1e-9)

    def test_rounds_validation(self):
        g = random_signed_graph(3, 5)
        with pytest.raises(ta.DomainError):
            ta.iterative_search(
                ta.sparse_trellis(3), ta.make_cost_model("hcc"), g, 0, ta.Extender()
            )


class TestSupersetDominance:
    def test_growing_trellises_never_get_worse(self, jet_cache):
        model = ta.make_cost_model("ginkgo", "h1")
        for seed in range(4):
            ev = jet_cache(7, 70 + seed)
            g_tree = ta.greedy(model, ev).tree
            small = ta.init_from_trees([g_tree], 7)
            cost_small = ta.astar_search(small, model, ev).cost
            _, pool = ta.beam_search(model, ev, 6, keep_pool=True)
            big = ta.init_from_trees([g_tree] + pool, 7)
            cost_big = ta.astar_search(big, model, ev).cost
            assert cost_big <= cost_small + 1e-9


class TestApproxSearch:
    def test_beam_init_dominates_beam(self, jet_cache):
        ev = jet_cache(10, 80)
        model = ta.make_cost_model("ginkgo", "h1")
        beam_best, pool = ta.beam_search(model, ev, 20, keep_pool=True)
        trellis = ta.init_from_trees(pool, 10)
        res = ta.astar_search(trellis, model, ev, extender=ta.Extender(rng_seed=2))
        assert res.cost <= beam_best.cost + 1e-9 * max(1.0, abs(beam_best.cost))

    def test_unknown_init_rejected(self):
        g = random_signed_graph(3, 6)
        with pytest.raises(ta.DomainError):
            ta.approx_search(ta.make_cost_model("hcc"), g, ta.Extender(), init="mcts")
