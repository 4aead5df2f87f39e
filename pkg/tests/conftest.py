import os
from itertools import combinations, product

import numpy as np
import pytest

from twbn_slim.graphs import Dag, exact_treewidth, is_acyclic, min_fill_ordering, moralize, td_from_elimination
from twbn_slim.heuristic import InitialSolution, greedy_initial
from twbn_slim.scoring import ScoreCache, dag_score, prune


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TWBN_SLIM_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set TWBN_SLIM_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_cache(rng: np.random.Generator, n: int, max_parent_size: int = 2, max_entries: int = 4) -> ScoreCache:
    """Integer-valued scores, so scaled weights are exact."""
    raw = {}
    for v in range(n):
        others = [u for u in range(n) if u != v]
        subsets = [frozenset(c) for k in range(1, max_parent_size + 1) for c in combinations(others, k)]
        empty = -float(rng.integers(20, 40))
        scored = [(frozenset(), empty)]
        picks = rng.choice(len(subsets), size=min(max_entries - 1, len(subsets)), replace=False)
        for i in picks:
            scored.append((subsets[int(i)], empty + float(rng.integers(1, 15))))
        raw[v] = scored
    return prune(raw)


def random_solution(cache: ScoreCache, W: int, rng: np.random.Generator, attempts: int = 20) -> InitialSolution:
    """A random DAG of cached parent sets whose min-fill decomposition has width <= W."""
    n = cache.vertex_count
    for _ in range(attempts):
        order = [int(v) for v in rng.permutation(n)]
        position = {v: i for i, v in enumerate(order)}
        parents = []
        for v in range(n):
            fitting = [e.parents for e in cache.entries(v) if all(position[u] < position[v] for u in e.parents)]
            parents.append(fitting[int(rng.integers(len(fitting)))])
        dag = Dag(tuple(parents))
        moral = moralize(dag)
        td = td_from_elimination(min_fill_ordering(moral), moral)
        if td.width <= W:
            return InitialSolution(dag, td, dag_score(cache, dag))
    return greedy_initial(cache, W, int(rng.integers(1000)))


def brute_force_optimum(cache: ScoreCache, W: int) -> float:
    """Best score over every DAG of cached parent sets with moral treewidth <= W."""
    n = cache.vertex_count
    best = -np.inf
    for entries in product(*(cache.entries(v) for v in range(n))):
        score = sum(e.score for e in entries)
        if score <= best:
            continue
        dag = Dag(tuple(e.parents for e in entries))
        if is_acyclic(dag) and exact_treewidth(moralize(dag))[0] <= W:
            best = score
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def make_cache():
    return random_cache


@pytest.fixture
def make_solution():
    return random_solution


@pytest.fixture
def optimum():
    return brute_force_optimum


@pytest.fixture
def external_path_cache():
    """Five vertices where 1 -> 4 -> 2 runs through the external vertex 4.

    Vertex 1 may take {2}, vertex 2 holds {4}, vertex 4 holds {1}.
    """
    return ScoreCache({
        0: [((), -10.0)],
        1: [((), -10.0), ((2,), -5.0)],
        2: [((), -10.0), ((4,), -6.0)],
        3: [((), -10.0)],
        4: [((), -10.0), ((1,), -7.0)],
    })
