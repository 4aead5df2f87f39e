"""Weighted partial MaxSAT encoding of a subinstance and decoding of its models.

Variables: ``par`` (one per menu entry), ``acyc`` and ``ord`` (one per unordered pair u < v,
read through the signed convention ``acyc*(v, u) = -acyc(u, v)``) and ``arc`` (every ordered
pair, loops included). ``acyc*(u, v)`` puts u before v in the topological order of the local
DAG; ``ord*(u, v)`` eliminates u before v; ``arc(u, v)`` makes v a later neighbour of u in
the fill-in graph.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations
from typing import Callable, Iterable, Mapping, Optional, Sequence

import networkx as nx

from twbn_slim.errors import EncodingError, SolverProtocolError
from twbn_slim.graphs import EliminationOrdering, TreeDecomposition, exact_treewidth, higher_neighbours, td_from_elimination
from twbn_slim.subinstance import Subinstance

logger = logging.getLogger(__name__)

Clause = tuple[int, ...]

# Exactly-one groups up to this size use the pairwise at-most-one encoding.
PAIRWISE_LIMIT = 5


class VarTable:
    def __init__(self, vertices: Sequence[int], menus: Mapping[int, Iterable]):
        self.names: list[tuple] = [()]
        self.par: dict[tuple[int, frozenset[int]], int] = {}
        self.acyc: dict[tuple[int, int], int] = {}
        self.ord: dict[tuple[int, int], int] = {}
        self.arc: dict[tuple[int, int], int] = {}
        for v in vertices:
            for entry in menus[v]:
                self.par[(v, entry.parents)] = self._new(("par", v, entry.parents))
        for u, v in combinations(vertices, 2):
            self.acyc[(u, v)] = self._new(("acyc", u, v))
        for u, v in combinations(vertices, 2):
            self.ord[(u, v)] = self._new(("ord", u, v))
        for u in vertices:
            for v in vertices:
                self.arc[(u, v)] = self._new(("arc", u, v))

    def _new(self, name: tuple) -> int:
        self.names.append(name)
        return len(self.names) - 1

    @property
    def count(self) -> int:
        return len(self.names) - 1

    def acyc_lit(self, u: int, v: int) -> int:
        return self.acyc[(u, v)] if u < v else -self.acyc[(v, u)]

    def ord_lit(self, u: int, v: int) -> int:
        return self.ord[(u, v)] if u < v else -self.ord[(v, u)]


@dataclass(frozen=True)
class AtMost:
    literals: tuple[int, ...]
    bound: int


@dataclass(frozen=True)
class Wcnf:
    """A compiled instance: cardinality constraints expanded, auxiliaries included in ``variable_count``."""

    variable_count: int
    hard: tuple[Clause, ...]
    soft: tuple[tuple[Clause, int], ...]
    top: int


@dataclass(frozen=True)
class MaxSatProblem:
    vertices: tuple[int, ...]
    treewidth: int
    weight_scale: int
    variables: VarTable = field(repr=False)
    hard: tuple[Clause, ...] = field(repr=False)
    exactly_one: tuple[tuple[int, ...], ...] = field(repr=False)
    at_most: tuple[AtMost, ...] = field(repr=False)
    soft: tuple[tuple[Clause, int], ...] = field(repr=False)
    current_weight: int = 0

    @property
    def top(self) -> int:
        return sum(w for _, w in self.soft) + 1

    @cached_property
    def compiled(self) -> Wcnf:
        return self.compile()

    def compile(self) -> Wcnf:
        counter = [self.variables.count]

        def new_var() -> int:
            counter[0] += 1
            return counter[0]

        clauses = list(self.hard)
        for group in self.exactly_one:
            clauses.append(group)
            clauses.extend(at_most_one(group, new_var))
        for constraint in self.at_most:
            clauses.extend(sequential_counter(constraint.literals, constraint.bound, new_var))
        return Wcnf(counter[0], tuple(clauses), self.soft, self.top)


@dataclass(frozen=True)
class MaxSatModel:
    assignment: Mapping[int, bool]
    weight: int

    @classmethod
    def from_literals(cls, literals: Iterable[int], problem: MaxSatProblem) -> "MaxSatModel":
        assignment = {abs(lit): lit > 0 for lit in literals if lit != 0}
        return cls(assignment, model_weight(problem, assignment))

    def value(self, var: int) -> bool:
        return self.assignment.get(var, False)


@dataclass(frozen=True)
class DecodedLocal:
    parents: Mapping[int, frozenset[int]]
    topological_order: tuple[int, ...]
    elimination_order: EliminationOrdering
    td: TreeDecomposition
    weight: int


def at_most_one(literals: Sequence[int], new_var: Callable[[], int]) -> list[Clause]:
    if len(literals) <= PAIRWISE_LIMIT:
        return [(-a, -b) for a, b in combinations(literals, 2)]
    return sequential_counter(literals, 1, new_var)


def sequential_counter(literals: Sequence[int], bound: int, new_var: Callable[[], int]) -> list[Clause]:
    """Sequential counter for sum(literals) <= bound; register s[i][j] means "more than j of x_0..x_i"."""
    n = len(literals)
    if bound >= n:
        return []
    if bound == 0:
        return [(-x,) for x in literals]
    s = [[new_var() for _ in range(bound)] for _ in range(n - 1)]
    clauses: list[Clause] = [(-literals[0], s[0][0])]
    clauses.extend((-s[0][j],) for j in range(1, bound))
    for i in range(1, n - 1):
        x = literals[i]
        clauses.append((-x, s[i][0]))
        clauses.append((-s[i - 1][0], s[i][0]))
        for j in range(1, bound):
            clauses.append((-x, -s[i - 1][j - 1], s[i][j]))
            clauses.append((-s[i - 1][j], s[i][j]))
        clauses.append((-x, -s[i - 1][bound - 1]))
    clauses.append((-literals[n - 1], -s[n - 2][bound - 1]))
    return clauses


def encode(sub: Subinstance, W: int, weight_scale: Optional[int] = None) -> MaxSatProblem:
    """Build the weighted partial MaxSAT instance whose optima are the best local solutions of ``sub``."""
    scale = sub.weight_scale if weight_scale is None else weight_scale
    if scale < 1:
        raise EncodingError("weight_scale must be at least 1")
    if W < 0:
        raise EncodingError("treewidth bound must be non-negative")
    vs = sub.vertices
    for v in vs:
        if not sub.menus[v]:
            raise EncodingError(f"vertex {v} has an empty parent-set menu")
    var = VarTable(vs, sub.menus)
    acyc, order, arc = var.acyc_lit, var.ord_lit, var.arc
    hard: list[Clause] = []

    # transitivity of both orders
    for u, v, w in permutations(vs, 3):
        hard.append((-acyc(u, v), -acyc(v, w), acyc(u, w)))
        hard.append((-order(u, v), -order(v, w), order(u, w)))

    for v in vs:
        hard.append((-arc[(v, v)],))

    exactly_one = []
    soft: list[tuple[Clause, int]] = []
    current_weight = 0
    for v in vs:
        group = []
        for entry in sub.menus[v]:
            p = var.par[(v, entry.parents)]
            group.append(p)
            inside = sorted(entry.parents & sub.vertex_set)
            for u in inside:
                hard.append((-p, acyc(u, v)))
                hard.append((-p, -order(u, v), arc[(u, v)]))
                hard.append((-p, order(u, v), arc[(v, u)]))
            for u, w in combinations(inside, 2):
                hard.append((-p, -order(u, w), arc[(u, w)]))
                hard.append((-p, order(u, w), arc[(w, u)]))
            for u, _ in sorted(entry.forced_arcs):
                hard.append((-p, acyc(u, v)))
            weight = round(scale * entry.offset)
            if weight > 0:
                soft.append(((p,), weight))
            elif weight < 0:
                soft.append(((-p,), -weight))
            if entry.parents == sub.incumbent[v]:
                current_weight += max(0, weight)
        exactly_one.append(tuple(group))

    # fill-in: two later neighbours of u are adjacent, oriented by their elimination order
    for u in vs:
        for v, w in combinations([x for x in vs if x != u], 2):
            hard.append((-arc[(u, v)], -arc[(u, w)], -order(v, w), arc[(v, w)]))
            hard.append((-arc[(u, v)], -arc[(u, w)], order(v, w), arc[(w, v)]))

    for u, v in combinations(vs, 2):
        hard.append((-arc[(u, v)], -arc[(v, u)]))

    for u, v in sorted(sub.virtual_edges):
        hard.append((-order(u, v), arc[(u, v)]))
        hard.append((order(u, v), arc[(v, u)]))

    at_most = tuple(AtMost(tuple(arc[(v, w)] for w in vs if w != v), W) for v in vs)
    problem = MaxSatProblem(
        vertices=vs,
        treewidth=W,
        weight_scale=scale,
        variables=var,
        hard=tuple(hard),
        exactly_one=tuple(exactly_one),
        at_most=at_most,
        soft=tuple(soft),
        current_weight=current_weight,
    )
    logger.debug("encoded %d vertices: %d variables, %d hard clauses, %d soft clauses",
                 len(vs), var.count, len(hard), len(soft))
    return problem


def model_weight(problem: MaxSatProblem, assignment: Mapping[int, bool]) -> int:
    """Total weight of satisfied soft clauses; unassigned variables count as false."""
    def holds(lit: int) -> bool:
        return assignment.get(abs(lit), False) == (lit > 0)

    return sum(w for clause, w in problem.soft if any(holds(lit) for lit in clause))


def check_model(problem: MaxSatProblem, assignment: Mapping[int, bool]) -> list[str]:
    """Violated hard constraints of ``problem`` under ``assignment``, read on the primary variables only."""
    def holds(lit: int) -> bool:
        return assignment.get(abs(lit), False) == (lit > 0)

    violations = [f"hard clause {clause} violated" for clause in problem.hard if not any(holds(x) for x in clause)]
    for group in problem.exactly_one:
        chosen = sum(holds(x) for x in group)
        if chosen != 1:
            violations.append(f"{chosen} parent sets chosen in group {group}")
    for constraint in problem.at_most:
        if sum(holds(x) for x in constraint.literals) > constraint.bound:
            violations.append(f"more than {constraint.bound} of {constraint.literals} true")
    return violations


def _total_order(vertices: Sequence[int], before: Callable[[int, int], bool]) -> tuple[int, ...]:
    predecessors = {v: sum(before(u, v) for u in vertices if u != v) for v in vertices}
    if sorted(predecessors.values()) != list(range(len(vertices))):
        raise SolverProtocolError("order variables do not form a total order")
    return tuple(sorted(vertices, key=predecessors.__getitem__))


def decode(problem: MaxSatProblem, model: MaxSatModel, sub: Subinstance) -> DecodedLocal:
    violations = check_model(problem, model.assignment)
    if violations:
        raise SolverProtocolError(f"model violates {len(violations)} hard constraints, first: {violations[0]}")
    var = problem.variables

    def lit_true(lit: int) -> bool:
        return model.value(abs(lit)) == (lit > 0)

    choice = {}
    for (v, parents), p in var.par.items():
        if model.value(p):
            choice[v] = parents
    topological = _total_order(problem.vertices, lambda u, v: lit_true(var.acyc_lit(u, v)))
    elimination = EliminationOrdering(_total_order(problem.vertices, lambda u, v: lit_true(var.ord_lit(u, v))))
    td = td_from_elimination(elimination, sub.extended_moral_graph(choice))
    if td.width > problem.treewidth:
        raise SolverProtocolError(f"decoded local decomposition has width {td.width} > {problem.treewidth}")
    return DecodedLocal(choice, topological, elimination, td, model.weight)


def model_for_choice(problem: MaxSatProblem, sub: Subinstance, choice: Mapping[int, frozenset[int]],
                     ordering: Optional[EliminationOrdering] = None) -> Optional[MaxSatModel]:
    """Primary-variable assignment realizing ``choice``, or None when the choice is infeasible.

    Without an ``ordering`` an optimal elimination ordering of the extended moral graph is computed.
    """
    digraph = sub.local_digraph(choice)
    if not nx.is_directed_acyclic_graph(digraph):
        return None
    graph = sub.extended_moral_graph(choice)
    if ordering is None:
        width, ordering = exact_treewidth(graph)
        if width > problem.treewidth:
            return None
    higher = higher_neighbours(ordering, graph)
    if max((len(h) for h in higher.values()), default=0) > problem.treewidth:
        return None

    topo_position = {v: i for i, v in enumerate(nx.lexicographical_topological_sort(digraph))}
    var = problem.variables
    assignment = {}
    for (v, parents), p in var.par.items():
        assignment[p] = choice[v] == parents
    for (u, v), x in var.acyc.items():
        assignment[x] = topo_position[u] < topo_position[v]
    for (u, v), x in var.ord.items():
        assignment[x] = ordering.position[u] < ordering.position[v]
    for (u, v), x in var.arc.items():
        assignment[x] = v in higher[u]
    return MaxSatModel(assignment, model_weight(problem, assignment))


def emit_wcnf(problem: MaxSatProblem) -> bytes:
    wcnf = problem.compiled
    lines = [f"p wcnf {wcnf.variable_count} {len(wcnf.hard) + len(wcnf.soft)} {wcnf.top}"]
    lines.extend(" ".join(str(x) for x in (wcnf.top, *clause, 0)) for clause in wcnf.hard)
    lines.extend(" ".join(str(x) for x in (weight, *clause, 0)) for clause, weight in wcnf.soft)
    return ("\n".join(lines) + "\n").encode()


def emit_varmap(problem: MaxSatProblem) -> str:
    lines = []
    for var_id, name in enumerate(problem.variables.names[1:], start=1):
        kind = name[0]
        if kind == "par":
            members = ",".join(str(u) for u in sorted(name[2]))
            lines.append(f"c varmap par {name[1]} [{members}] {var_id}")
        else:
            lines.append(f"c varmap {kind} {name[1]} {name[2]} {var_id}")
    return "\n".join(lines) + "\n" if lines else ""
