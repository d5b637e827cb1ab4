"""Exact and approximate minimum-cost hierarchical clustering via trellis search."""

from .core import (
    BadInputError,
    CapacityError,
    Cluster,
    CostModel,
    DomainError,
    Hierarchy,
    MissingNodeError,
    ObjectiveMismatchError,
    SearchExhaustedError,
    TrellisAstarError,
    sibling_pairs,
    tree_cost,
    zero_heuristic,
)
from .trellis import (
    HeapEntry,
    PartialHierarchy,
    Trellis,
    TrellisNode,
    extract_state,
    full_trellis,
    sparse_trellis,
    split_count,
)
from .search import (
    SearchResult,
    SearchStats,
    astar_search,
    compute_g,
    compute_h,
    count_trees_log10,
    explore_all,
    explore_leaves,
    propagate_updates,
    total_heap_entries,
)
from .graph_costs import (
    ClusterAggregates,
    SimilarityGraph,
    cosine_similarity_graph,
    dasgupta_heuristic,
    dasgupta_psi,
    graph_from_points,
    hcc_heuristic,
    hcc_psi,
    load_graph,
    load_points_csv,
    mean_center,
    save_graph,
)
from .ginkgo import (
    GinkgoHeuristicTables,
    JetEvent,
    generate_jet,
    generate_jet_with_leaves,
    ginkgo_h0,
    ginkgo_h1,
    heuristic_tables,
    load_jet,
    lower_bound_t,
    save_jet,
    split_nll,
)
from .construct import (
    Extender,
    approx_search,
    init_from_trees,
    iterative_search,
    sample_splits,
)
from .baselines import (
    beam_search,
    brute_force_map,
    default_beam_width,
    double_factorial_trees,
    exact_trellis_map,
    greedy,
    iter_hierarchies,
)
from .models import COST_NAMES, DEFAULT_HEURISTIC, HEURISTIC_NAMES, make_cost_model

__version__ = "0.1.0"
