import math

import numpy as np
import pytest

import trellis_astar as ta
from trellis_astar.baselines import _canonical_splits
from trellis_astar.core import is_singleton
from trellis_astar.search import Evaluator
from trellis_astar.trellis import make_entry

from conftest import make_jet, random_nonneg_graph, random_signed_graph


def subset_optimum(model, ctx, cluster, memo=None):
    """Independent recursion: minimal sub-tree cost over one cluster."""
    if memo is None:
        memo = {}
    if is_singleton(cluster):
        return 0.0
    if cluster in memo:
        return memo[cluster]
    best = math.inf
    for left, right in _canonical_splits(cluster):
        best = min(
            best,
            model.psi(left, right, ctx)
            + subset_optimum(model, ctx, left, memo)
            + subset_optimum(model, ctx, right, memo),
        )
    memo[cluster] = best
    return best


class TestAstarExamples:
    def test_single_element(self):
        g = ta.SimilarityGraph(1, np.zeros((1, 1)))
        res = ta.astar_search(ta.full_trellis(1), ta.make_cost_model("hcc"), g)
        assert res.cost == 0.0
        assert res.tree.clusters == frozenset({1})

    def test_two_elements_hcc(self):
        g = ta.SimilarityGraph.from_edges(2, [(0, 1, 0.5)])
        res = ta.astar_search(ta.full_trellis(2), ta.make_cost_model("hcc"), g)
        assert res.cost == pytest.approx(0.5)

    def test_dasgupta_three_elements(self):
        g = ta.SimilarityGraph.from_edges(3, [(0, 1, 1.0)])
        res = ta.astar_search(ta.full_trellis(3), ta.make_cost_model("dasgupta"), g)
        assert res.cost == pytest.approx(2.0)
        assert 0b011 in res.tree.clusters  # {0,1} merged first


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", range(2, 7))
    def test_hcc_matches_oracle(self, n):
        for seed in range(8):
            g = random_signed_graph(n, seed)
            model = ta.make_cost_model("hcc")
            res = ta.astar_search(ta.full_trellis(n), model, g)
            oracle, _ = ta.brute_force_map(model, g)
            assert res.cost == pytest.approx(oracle.cost, rel=1e-9, abs=1e-12)
            assert ta.tree_cost(res.tree, model, g) == pytest.approx(res.cost, rel=1e-9)

    @pytest.mark.parametrize("n", range(2, 7))
    def test_dasgupta_matches_oracle(self, n):
        for seed in range(8):
            g = random_nonneg_graph(n, seed)
            model = ta.make_cost_model("dasgupta")
            res = ta.astar_search(ta.full_trellis(n), model, g)
            oracle, _ = ta.brute_force_map(model, g)
            assert res.cost == pytest.approx(oracle.cost, rel=1e-9, abs=1e-12)

    def test_zero_heuristic_soundness(self):
        # the search machinery alone, admissible for nonnegative psi
        for n in (3, 5, 6):
            for seed in range(5):
                g = random_signed_graph(n, 100 + seed)
                model = ta.make_cost_model("hcc", "zero")
                res = ta.astar_search(ta.full_trellis(n), model, g)
                oracle, _ = ta.brute_force_map(ta.make_cost_model("hcc"), g)
                assert res.cost == pytest.approx(oracle.cost, rel=1e-9, abs=1e-12)

    def test_ginkgo_with_h0_matches_oracle(self, jet_cache):
        model = ta.make_cost_model("ginkgo", "h0")
        for n in (2, 4, 6):
            for seed in range(4):
                ev = jet_cache(n, 400 + seed)
                res = ta.astar_search(ta.full_trellis(n), model, ev)
                oracle, _ = ta.brute_force_map(model, ev)
                assert res.cost == pytest.approx(oracle.cost, rel=1e-9)


class TestExploreLeaves:
    def test_two_element_frontier(self):
        g = random_signed_graph(2, 0)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(2)
        ta.explore_leaves(t, [0b11], model, g)
        q = t.node(0b11).queue
        assert len(q) == 1
        assert q[0].g == pytest.approx(model.psi(0b01, 0b10, g))
        assert q[0].h == 0.0

    def test_three_element_frontier_has_three_entries(self):
        g = random_signed_graph(3, 1)
        t = ta.full_trellis(3)
        ta.explore_leaves(t, [0b111], ta.make_cost_model("hcc"), g)
        assert len(t.node(0b111).queue) == 3

    def test_h_of_unexplored_child_is_heuristic(self):
        g = random_signed_graph(3, 2)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(3)
        h = ta.compute_h(0b001, 0b110, t, model, g)
        assert h == pytest.approx(model.heuristic(0b110, g))

    def test_stats_increment_per_node(self):
        g = random_signed_graph(4, 3)
        t = ta.full_trellis(4)
        stats = ta.SearchStats()
        ta.explore_leaves(
            t, [0b0011, 0b1100], ta.make_cost_model("hcc"), g, stats=stats
        )
        assert stats.nodes_explored == 2
        assert stats.heap_pushes == 2  # one split each


class TestComputeG:
    def test_both_singletons(self):
        g = random_signed_graph(2, 4)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(2)
        assert ta.compute_g(0b01, 0b10, t, model, g) == pytest.approx(
            model.psi(0b01, 0b10, g)
        )

    def test_explored_child_adds_its_best_g(self):
        g = random_signed_graph(3, 5)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(3)
        ta.explore_leaves(t, [0b011], model, g)
        g_val = ta.compute_g(0b011, 0b100, t, model, g)
        expected = model.psi(0b011, 0b100, g) + t.node(0b011).queue[0].g
        assert g_val == pytest.approx(expected)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_exhaustive_g_equals_recomputed_subtree_cost(self, n):
        # after bottom-up exhaustive exploration, every queue minimum's g is
        # the exact optimum of its subset, and its h is 0
        g = random_signed_graph(n, 6)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(n)
        ta.explore_all(t, model, g)
        memo = {}
        for cluster in range(1, 2**n):
            if is_singleton(cluster):
                continue
            top = t.node(cluster).queue[0]
            assert top.h == 0.0
            assert top.g == pytest.approx(
                subset_optimum(model, g, cluster, memo), rel=1e-9, abs=1e-12
            )


class TestPropagateUpdates:
    def test_hand_trace_three_elements(self):
        # exploring {1,2} under root {0,1,2} drops the root entry's h from
        # the heuristic estimate of {1,2} to the explored minimum's h (0)
        g = random_signed_graph(3, 7)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(3)
        ta.explore_leaves(t, [0b111], model, g)
        nd = t.node(0b111)
        nd.queue = [make_entry(1.0, model.heuristic(0b110, g), 0b001, 0b110)]
        state = ta.extract_state(t)
        assert state.frontier == [0b110]
        ta.explore_leaves(t, state.frontier, model, g)
        ta.propagate_updates(t, state, model, g)
        top = nd.queue[0]
        assert top.h == 0.0
        assert top.g == pytest.approx(
            model.psi(0b001, 0b110, g) + t.node(0b110).queue[0].g
        )

    def test_two_element_root_update_is_idempotent(self):
        g = random_signed_graph(2, 8)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(2)
        ta.explore_leaves(t, [0b11], model, g)
        before = t.node(0b11).queue[0]
        state = ta.extract_state(t)
        ta.propagate_updates(t, state, model, g)
        assert t.node(0b11).queue[0] == before

    def test_consistency_invariant_after_updates(self):
        g = random_signed_graph(5, 9)
        model = ta.make_cost_model("hcc")
        t = ta.full_trellis(5)
        res = ta.astar_search(t, model, g)
        for cluster in range(1, 2**5):
            nd = t._nodes.get(cluster)
            if nd is None or not nd.queue:
                continue
            top = nd.queue[0]
            assert nd.best_value == top.f
            assert all(top.f <= e.f for e in nd.queue)
            assert top.f == top.g + top.h


class TestSearchBehavior:
    def test_termination_iterations_bounded_by_nodes(self):
        for n in (4, 5, 6):
            g = random_signed_graph(n, 10 + n)
            res = ta.astar_search(ta.full_trellis(n), ta.make_cost_model("hcc"), g)
            assert res.stats.iterations <= 2**n

    def test_counter_bound(self):
        n = 6
        g = random_signed_graph(n, 20)
        res = ta.astar_search(ta.full_trellis(n), ta.make_cost_model("hcc"), g)
        closed = sum(math.comb(n, k) * (2 ** (k - 1) - 1) for k in range(2, n + 1))
        assert res.stats.heap_pushes <= closed + res.stats.heap_pops
        assert res.stats.nodes_explored <= 2**n - 1

    def test_heuristic_dominance_fewer_explored(self):
        # pointwise-larger admissible heuristic never explores more nodes
        for seed in range(10):
            g = random_signed_graph(7, 30 + seed)
            informed = ta.astar_search(
                ta.full_trellis(7), ta.make_cost_model("hcc", "hcc"), g
            )
            blind = ta.astar_search(
                ta.full_trellis(7), ta.make_cost_model("hcc", "zero"), g
            )
            assert informed.stats.nodes_explored <= blind.stats.nodes_explored

    def test_ginkgo_h0_dominates_zero(self, jet_cache):
        for seed in range(5):
            ev = jet_cache(6, 600 + seed)
            informed = ta.astar_search(
                ta.full_trellis(6), ta.make_cost_model("ginkgo", "h0"), ev
            )
            blind = ta.astar_search(
                ta.full_trellis(6), ta.make_cost_model("ginkgo", "zero"), ev
            )
            assert informed.stats.nodes_explored <= blind.stats.nodes_explored

    def test_search_exhausted_on_splitless_sparse_trellis(self):
        g = random_signed_graph(3, 40)
        t = ta.sparse_trellis(3)  # root recorded, no splits, no extender
        with pytest.raises(ta.SearchExhaustedError):
            ta.astar_search(t, ta.make_cost_model("hcc"), g)

    def test_dead_end_is_routed_around(self):
        # {1,2} has no recorded split, but the ({0,1},{2}) route completes
        g = random_signed_graph(3, 41)
        t = ta.sparse_trellis(3)
        t.record_split(0b111, 0b001, 0b110)
        t.record_split(0b111, 0b011, 0b100)
        t.record_split(0b011, 0b001, 0b010)
        model = ta.make_cost_model("hcc")
        res = ta.astar_search(t, model, g)
        expected = model.psi(0b011, 0b100, g) + model.psi(0b001, 0b010, g)
        assert res.cost == pytest.approx(expected)

    def test_all_infinite_costs_exhaust(self):
        ev = ta.JetEvent(np.array([[1.0, 0, 0, 0.999], [1.0, 0, 0, -0.999]]), 1.5, 9.0)
        # pair mass < t_cut: the only split is impossible
        with pytest.raises(ta.SearchExhaustedError):
            ta.astar_search(ta.full_trellis(2), ta.make_cost_model("ginkgo", "h0"), ev)

    def test_result_invariant_cost_equals_tree_cost(self, jet_cache):
        model = ta.make_cost_model("ginkgo", "h1")
        for seed in range(5):
            ev = jet_cache(7, 700 + seed)
            res = ta.astar_search(ta.full_trellis(7), model, ev)
            assert ta.tree_cost(res.tree, model, ev) == pytest.approx(
                res.cost, rel=1e-9
            )


class TestTreeCounting:
    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_fully_explored_trellis_counts_all_hierarchies(self, n):
        g = random_signed_graph(n, 50)
        t = ta.full_trellis(n)
        ta.explore_all(t, ta.make_cost_model("hcc"), g)
        expected = math.log10(ta.double_factorial_trees(n))
        assert ta.count_trees_log10(t) == pytest.approx(expected, rel=1e-12)

    def test_partial_trellis_counts_at_least_one_at_goal(self):
        g = random_signed_graph(6, 51)
        res = ta.astar_search(ta.full_trellis(6), ta.make_cost_model("hcc"), g)
        assert res.stats.trees_in_trellis_log10 >= 0.0

    def test_single_tree_trellis_counts_one(self):
        g = random_signed_graph(4, 52)
        model = ta.make_cost_model("hcc")
        tree = ta.greedy(model, g).tree
        t = ta.init_from_trees([tree], 4)
        ta.astar_search(t, model, g)
        assert ta.count_trees_log10(t) == pytest.approx(0.0, abs=1e-12)
