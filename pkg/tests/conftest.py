"""Shared instance factories for the test suite."""

import math

import numpy as np
import pytest

import trellis_astar as ta


def random_signed_graph(n: int, seed: int) -> ta.SimilarityGraph:
    """Mean-centered normal weights (correlation-clustering style input)."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(n, n))
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    g = ta.SimilarityGraph(n, w)
    return ta.mean_center(g) if n >= 2 else g


def random_nonneg_graph(n: int, seed: int) -> ta.SimilarityGraph:
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1.0, size=(n, n))
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    return ta.SimilarityGraph(n, w)


def t_root_for(n: int) -> float:
    """Mass scale whose typical jet has about n leaves (lam=1.5, t_cut=1)."""
    if n >= 40:
        return 2.6e5 * (n / 80.0) ** 3
    return float(math.exp((n + 9) / 4.4))


def make_jet(n: int, seed: int) -> ta.JetEvent:
    return ta.generate_jet_with_leaves(n, 1.5, t_root_for(n), 1.0, seed=seed)


@pytest.fixture(scope="session")
def jet_cache():
    """Memoized jets so suites can share instances."""
    cache: dict[tuple[int, int], ta.JetEvent] = {}

    def get(n: int, seed: int) -> ta.JetEvent:
        key = (n, seed)
        if key not in cache:
            cache[key] = make_jet(n, seed)
        return cache[key]

    return get
