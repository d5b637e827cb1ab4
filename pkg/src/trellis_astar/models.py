"""Registry binding objective names to (psi, heuristic) cost models."""

from __future__ import annotations

from .core import CostModel, DomainError, zero_heuristic
from .ginkgo import ginkgo_h0, ginkgo_h1, split_nll
from .graph_costs import (
    dasgupta_heuristic,
    dasgupta_psi,
    hcc_heuristic,
    hcc_psi,
)

_PSI = {
    "hcc": hcc_psi,
    "dasgupta": dasgupta_psi,
    "ginkgo": split_nll,
}

_HEURISTICS = {
    "hcc": {"hcc": hcc_heuristic, "zero": zero_heuristic},
    "dasgupta": {"dasgupta": dasgupta_heuristic, "zero": zero_heuristic},
    "ginkgo": {"h0": ginkgo_h0, "h1": ginkgo_h1, "zero": zero_heuristic},
}

# zero is admissible only for nonnegative psi; ginkgo costs can be negative
DEFAULT_HEURISTIC = {"hcc": "hcc", "dasgupta": "dasgupta", "ginkgo": "h1"}

COST_NAMES = tuple(sorted(_PSI))
HEURISTIC_NAMES = ("zero", "hcc", "dasgupta", "h0", "h1")


def make_cost_model(cost: str, heuristic: str | None = None) -> CostModel:
    if cost not in _PSI:
        raise DomainError(f"unknown cost {cost!r}; choose from {COST_NAMES}")
    heuristic = heuristic or DEFAULT_HEURISTIC[cost]
    table = _HEURISTICS[cost]
    if heuristic not in table:
        raise DomainError(
            f"heuristic {heuristic!r} does not apply to cost {cost!r}; "
            f"choose from {tuple(sorted(table))}"
        )
    return CostModel(
        name=cost,
        psi=_PSI[cost],
        heuristic=table[heuristic],
        heuristic_name=heuristic,
    )
