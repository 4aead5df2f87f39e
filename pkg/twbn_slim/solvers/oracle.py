import math
from itertools import product
from typing import Optional

import networkx as nx

from twbn_slim.encoding import MaxSatProblem, model_for_choice
from twbn_slim.errors import OracleTooLargeError
from twbn_slim.graphs import EXACT_TREEWIDTH_LIMIT, exact_treewidth
from twbn_slim.solvers.backend import SolverBackend, SolveStatus
from twbn_slim.subinstance import Subinstance


COMBINATION_LIMIT = 10 ** 5


def best_choice(sub: Subinstance, W: int) -> Optional[tuple[int, dict[int, frozenset[int]]]]:
    """Exhaustive search over all menu combinations of ``sub``.

    A combination is feasible when its parent arcs plus forced virtual arcs are acyclic and
    the local moral graph plus virtual edges has treewidth at most ``W``. Returns the best
    summed weight and the combination reaching it, or None if nothing is feasible.
    """
    vertices = sub.vertices
    combinations = math.prod(len(sub.menus[v]) for v in vertices)
    if combinations > COMBINATION_LIMIT:
        raise OracleTooLargeError(f"oracle too large: {combinations} menu combinations")
    if len(vertices) > EXACT_TREEWIDTH_LIMIT:
        raise OracleTooLargeError(f"oracle too large: {len(vertices)} vertices")

    widths: dict[frozenset, int] = {}
    best: Optional[tuple[int, dict[int, frozenset[int]]]] = None
    for entries in product(*(sub.menus[v] for v in vertices)):
        weight = sum(e.weight for e in entries)
        if best is not None and weight <= best[0]:
            continue
        choice = {v: e.parents for v, e in zip(vertices, entries)}
        if not nx.is_directed_acyclic_graph(sub.local_digraph(choice)):
            continue
        graph = sub.extended_moral_graph(choice)
        key = frozenset(frozenset(edge) for edge in graph.edges())
        if key not in widths:
            widths[key] = exact_treewidth(graph)[0]
        if widths[key] <= W:
            best = (weight, choice)
    return best


class OracleSolver(SolverBackend):
    """Exact reference backend that never looks at the clauses."""

    name = "oracle"

    def _solve(self, problem: MaxSatProblem, sub: Subinstance, timeout: Optional[float]):
        try:
            best = best_choice(sub, problem.treewidth)
        except OracleTooLargeError as e:
            return SolveStatus.ERROR, None, str(e)
        if best is None:
            return SolveStatus.ERROR, None, "no feasible combination"
        _, choice = best
        model = model_for_choice(problem, sub, choice)
        if model is None:
            return SolveStatus.ERROR, None, "best combination has no model"
        return SolveStatus.OPTIMUM, model, ""
