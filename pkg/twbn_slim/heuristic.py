import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import networkx as nx
import numpy as np

from twbn_slim.errors import InitialSolutionError, InputError
from twbn_slim.graphs import (
    Dag,
    TreeDecomposition,
    is_acyclic,
    min_fill_ordering,
    moralize,
    read_td,
    td_from_elimination,
    validate_td,
)
from twbn_slim.scoring import Dataset, ParentSetScore, ScoreCache, bic_score, dag_score

logger = logging.getLogger(__name__)

# Seed cliques larger than this are filled greedily instead of by subset DP.
EXACT_CLIQUE_LIMIT = 12

DAG_LINE = re.compile(r"^\s*(\d+)\s*<-\s*\[([^\]]*)\]\s*(?::\s*(\S+))?\s*$")


@dataclass(frozen=True)
class InitialSolution:
    dag: Dag
    td: TreeDecomposition
    score: float


def _best_within(cache: ScoreCache, v: int, allowed: frozenset[int]) -> ParentSetScore:
    for entry in cache.entries(v):
        if entry.parents <= allowed:
            return entry
    raise AssertionError("the empty parent set always fits")


def _learn_clique(cache: ScoreCache, vertices: Sequence[int]) -> dict[int, frozenset[int]]:
    """Best DAG restricted to ``vertices`` by dynamic programming over sinks of vertex subsets."""
    if len(vertices) > EXACT_CLIQUE_LIMIT:
        parents = {}
        for i, v in enumerate(vertices):
            parents[v] = _best_within(cache, v, frozenset(vertices[:i])).parents
        return parents

    k = len(vertices)
    best = {0: (0.0, None)}
    for mask in sorted(range(1, 1 << k), key=lambda m: bin(m).count("1")):
        members = frozenset(vertices[i] for i in range(k) if mask >> i & 1)
        candidates = []
        for i in range(k):
            if mask >> i & 1:
                previous = mask ^ (1 << i)
                entry = _best_within(cache, vertices[i], members - {vertices[i]})
                candidates.append((best[previous][0] + entry.score, i, entry.parents))
        score, sink, parent_set = max(candidates, key=lambda c: (c[0], -c[1]))
        best[mask] = (score, (sink, parent_set))

    parents = {}
    mask = (1 << k) - 1
    while mask:
        sink, parent_set = best[mask][1]
        parents[vertices[sink]] = parent_set
        mask ^= 1 << sink
    return parents


def greedy_initial(cache: ScoreCache, W: int, seed: int) -> InitialSolution:
    """Grow a W-tree over a random vertex order, giving each new vertex its best fitting parent set.

    The first W+1 visited vertices form the seed clique and are learned exactly. Every later
    vertex v takes the best cached parent set P (|P| <= W) lying inside an existing clique and
    opens a new clique P + filler + {v} attached to it, so the moral graph stays inside the
    W-tree and the width never exceeds W.
    """
    if W < 1:
        raise InputError("treewidth bound must be at least 1")
    rng = np.random.default_rng(seed)
    n = cache.vertex_count
    order = [int(v) for v in rng.permutation(n)]
    seed_clique = order[:W + 1]

    parents = {v: frozenset() for v in range(n)}
    parents.update(_learn_clique(cache, seed_clique))
    tree = nx.Graph()
    tree.add_node(0)
    bags = {0: frozenset(seed_clique)}
    holders = {v: {0} for v in seed_clique}

    for v in order[W + 1:]:
        parent_set, host = frozenset(), None
        for entry in cache.entries(v):
            if not entry.parents:
                break
            if len(entry.parents) > W or any(u not in holders for u in entry.parents):
                continue
            common = set.intersection(*(holders[u] for u in entry.parents))
            if common:
                parent_set, host = entry.parents, min(common)
                break
        if host is None:
            host = int(rng.integers(len(bags)))
        filler = sorted(bags[host] - parent_set)
        rng.shuffle(filler)
        clique = parent_set | frozenset(filler[:W - len(parent_set)]) | {v}
        new_id = len(bags)
        bags[new_id] = clique
        tree.add_edge(new_id, host)
        for u in clique:
            holders.setdefault(u, set()).add(new_id)
        parents[v] = parent_set

    dag = Dag(tuple(parents[v] for v in range(n)))
    td = TreeDecomposition(tree, bags)
    score = dag_score(cache, dag)
    logger.info("greedy initial solution: score %.6f, width %d", score, td.width)
    return InitialSolution(dag, td, score)


ParentScorer = Callable[[int, frozenset[int]], float]


def format_dag(dag: Dag, score: ParentScorer) -> str:
    """One line ``v <- [p1,...,pk] : score`` per vertex, scored by ``score(v, parents)``."""
    lines = []
    for v in range(dag.vertex_count):
        parent_set = dag.parent_set(v)
        members = ",".join(str(u) for u in sorted(parent_set))
        lines.append(f"{v} <- [{members}] : {float(score(v, parent_set))!r}")
    return "\n".join(lines) + "\n"


def write_dag(dag: Dag, path: Union[str, Path], score: ParentScorer) -> None:
    Path(path).write_text(format_dag(dag, score))


def parse_dag(text: str, vertex_count: Optional[int] = None) -> Dag:
    """Read DAG lines; the ``: score`` suffix is optional on input and ignored."""
    parents: dict[int, frozenset[int]] = {}
    for line_num, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        match = DAG_LINE.match(line)
        if not match:
            raise InputError(f"line {line_num}: expected '<v> <- [p1,...,pk] : <score>', got {line!r}")
        v = int(match.group(1))
        members = [m.strip() for m in match.group(2).split(",") if m.strip()]
        parents[v] = frozenset(int(m) for m in members)
    n = vertex_count if vertex_count is not None else max(parents, default=-1) + 1
    if any(v >= n for v in parents):
        raise InputError(f"DAG file mentions vertices beyond 0..{n - 1}")
    return Dag(tuple(parents.get(v, frozenset()) for v in range(n)))


def read_dag(path: Union[str, Path], vertex_count: Optional[int] = None) -> Dag:
    return parse_dag(Path(path).read_text(), vertex_count)


def import_initial(dag_file: Union[str, Path], td_file: Optional[Union[str, Path]], cache: ScoreCache, W: int,
                   data: Optional[Dataset] = None, seed: int = 0) -> tuple[InitialSolution, ScoreCache]:
    """Load an externally computed DAG (and optionally its tree decomposition).

    Parent sets missing from the cache are scored from ``data`` and inserted, so the
    returned cache may differ from the one passed in. Without a ``td_file`` a min-fill
    decomposition of the moral graph is used.
    """
    n = cache.vertex_count
    dag = read_dag(dag_file, n)
    if not is_acyclic(dag):
        raise InitialSolutionError("initial DAG contains a directed cycle")
    for v in range(n):
        parent_set = dag.parent_set(v)
        if (v, parent_set) in cache:
            continue
        if data is None:
            raise InitialSolutionError(f"parent set {sorted(parent_set)} of vertex {v} is not in the score cache")
        cache = cache.with_entry(v, parent_set, bic_score(data, v, parent_set))
        logger.info("scored imported parent set %s of vertex %d", sorted(parent_set), v)

    moral = moralize(dag)
    if td_file is not None:
        td, declared = read_td(td_file)
        if declared != n:
            raise InitialSolutionError(f"tree decomposition is over {declared} vertices, expected {n}")
    else:
        td = td_from_elimination(min_fill_ordering(moral, np.random.default_rng(seed)), moral)
    ok, violations = validate_td(td, moral)
    if not ok:
        raise InitialSolutionError("invalid initial tree decomposition: " + "; ".join(x.message for x in violations))
    if td.width > W:
        raise InitialSolutionError(f"initial solution exceeds treewidth bound ({td.width} > {W})")
    return InitialSolution(dag, td, dag_score(cache, dag)), cache
