from twbn_slim.graphs.dag import Dag, MoralGraph, is_acyclic, moralize
from twbn_slim.graphs.decomposition import (
    EXACT_TREEWIDTH_LIMIT,
    EliminationOrdering,
    TdViolation,
    TreeDecomposition,
    exact_treewidth,
    fill_in_graph,
    higher_neighbours,
    min_fill_ordering,
    td_from_elimination,
    validate_td,
    width_of_elimination,
)
from twbn_slim.graphs.pace import format_td, parse_td, read_td, write_td

__all__ = [
    "EXACT_TREEWIDTH_LIMIT",
    "Dag",
    "EliminationOrdering",
    "MoralGraph",
    "TdViolation",
    "TreeDecomposition",
    "exact_treewidth",
    "fill_in_graph",
    "format_td",
    "higher_neighbours",
    "is_acyclic",
    "min_fill_ordering",
    "moralize",
    "parse_td",
    "read_td",
    "td_from_elimination",
    "validate_td",
    "width_of_elimination",
    "write_td",
]
