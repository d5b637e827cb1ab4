import math

import numpy as np
import pytest

import trellis_astar as ta

from conftest import random_nonneg_graph, random_signed_graph


class TestGreedy:
    def test_two_elements_unique_tree(self):
        g = ta.SimilarityGraph.from_edges(2, [(0, 1, 0.5)])
        res = ta.greedy(ta.make_cost_model("hcc"), g)
        assert res.cost == pytest.approx(0.5)
        assert res.tree.clusters == frozenset({0b01, 0b10, 0b11})

    def test_tie_break_demonstrates_suboptimality(self):
        # pair costs 2, 0, 0: the (0,2) merge wins the tie and locks in cost 3
        g = ta.SimilarityGraph.from_edges(3, [(0, 1, 1.0)])
        model = ta.make_cost_model("dasgupta")
        res = ta.greedy(model, g)
        assert 0b101 in res.tree.clusters
        assert res.cost == pytest.approx(3.0)
        oracle, _ = ta.brute_force_map(model, g)
        assert oracle.cost == pytest.approx(2.0)

    def test_never_beats_the_oracle(self):
        for seed in range(12):
            n = 3 + seed % 5
            g = random_signed_graph(n, seed)
            model = ta.make_cost_model("hcc")
            assert ta.greedy(model, g).cost >= ta.brute_force_map(model, g)[0].cost - 1e-9

    def test_cost_matches_tree(self):
        g = random_signed_graph(7, 50)
        model = ta.make_cost_model("hcc")
        res = ta.greedy(model, g)
        assert ta.tree_cost(res.tree, model, g) == pytest.approx(res.cost, rel=1e-9)


class TestBeamSearch:
    def test_width_one_equals_greedy(self):
        for seed in range(15):
            n = 2 + seed % 6
            g = random_nonneg_graph(n, seed)
            model = ta.make_cost_model("dasgupta")
            beam = ta.beam_search(model, g, 1)
            greedy = ta.greedy(model, g)
            assert beam.cost == pytest.approx(greedy.cost, rel=1e-12)
            assert beam.tree == greedy.tree

    def test_wider_beam_recovers_the_optimum(self):
        g = ta.SimilarityGraph.from_edges(3, [(0, 1, 1.0)])
        res = ta.beam_search(ta.make_cost_model("dasgupta"), g, 3)
        assert res.cost == pytest.approx(2.0)

    def test_default_width_rule(self):
        assert ta.default_beam_width(10) == 45
        assert ta.default_beam_width(40) == 780
        assert ta.default_beam_width(41) == 1000
        assert ta.default_beam_width(50) == 1000

    def test_dedup_is_sound_at_exhaustive_width(self):
        # with no width pressure, collapsing equal-cost states never loses
        # the optimum on real-valued instances
        for seed in range(8):
            n = 3 + seed % 4
            g = random_nonneg_graph(n, 100 + seed)
            model = ta.make_cost_model("dasgupta")
            with_dedup = ta.beam_search(model, g, 10**6, dedupe=True)
            without = ta.beam_search(model, g, 10**6, dedupe=False)
            oracle, _ = ta.brute_force_map(model, g)
            assert with_dedup.cost == pytest.approx(without.cost, rel=1e-12)
            assert with_dedup.cost == pytest.approx(oracle.cost, rel=1e-9)

    def test_keep_pool_returns_complete_trees(self):
        g = random_nonneg_graph(5, 9)
        model = ta.make_cost_model("dasgupta")
        best, pool = ta.beam_search(model, g, 4, keep_pool=True)
        assert 1 <= len(pool) <= 4
        assert best.cost == pytest.approx(
            min(ta.tree_cost(t, model, g) for t in pool), rel=1e-9
        )

    def test_width_validation(self):
        g = random_nonneg_graph(3, 1)
        with pytest.raises(ta.DomainError):
            ta.beam_search(ta.make_cost_model("dasgupta"), g, 0)


class TestBruteForce:
    @pytest.mark.parametrize("n,count", [(2, 1), (3, 3), (4, 15), (5, 105)])
    def test_tree_counts(self, n, count):
        g = random_signed_graph(n, n)
        _, trees = ta.brute_force_map(ta.make_cost_model("hcc"), g)
        assert trees == count == ta.double_factorial_trees(n)

    def test_map_example(self):
        g = ta.SimilarityGraph.from_edges(3, [(0, 1, 1.0)])
        res, count = ta.brute_force_map(ta.make_cost_model("dasgupta"), g)
        assert res.cost == pytest.approx(2.0) and count == 3

    def test_capacity_cap(self):
        g = ta.SimilarityGraph(11, np.zeros((11, 11)))
        with pytest.raises(ta.CapacityError):
            ta.brute_force_map(ta.make_cost_model("hcc"), g)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_matches_explicit_enumeration(self, n):
        # the memoized parse agrees with materializing every hierarchy
        g = random_signed_graph(n, 77 + n)
        model = ta.make_cost_model("hcc")
        res, count = ta.brute_force_map(model, g)
        explicit = [
            ta.tree_cost(ta.Hierarchy(n, clusters), model, g)
            for clusters in ta.iter_hierarchies((1 << n) - 1)
        ]
        assert len(explicit) == count
        assert min(explicit) == pytest.approx(res.cost, rel=1e-9)

    def test_enumeration_yields_distinct_valid_trees(self):
        seen = set()
        for clusters in ta.iter_hierarchies(0b1111):
            ta.Hierarchy(4, clusters)  # validates
            assert clusters not in seen
            seen.add(clusters)
        assert len(seen) == 15


class TestExactTrellisMap:
    def test_matches_oracle(self):
        for seed in range(5):
            g = random_signed_graph(6, 200 + seed)
            model = ta.make_cost_model("hcc")
            dp = ta.exact_trellis_map(model, g)
            oracle, _ = ta.brute_force_map(model, g)
            assert dp.cost == pytest.approx(oracle.cost, rel=1e-12)

    def test_has_its_own_cap(self):
        g = ta.SimilarityGraph(19, np.zeros((19, 19)))
        with pytest.raises(ta.CapacityError):
            ta.exact_trellis_map(ta.make_cost_model("hcc"), g)
