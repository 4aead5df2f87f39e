from functools import partial

import numpy as np
import pytest

from twbn_slim.errors import InitialSolutionError, InputError
from twbn_slim.graphs import Dag, TreeDecomposition, is_acyclic, moralize, validate_td, write_td
from twbn_slim.heuristic import format_dag, greedy_initial, import_initial, parse_dag, read_dag, write_dag
from twbn_slim.scoring import Dataset, ScoreCache, bic_score, dag_score


def _check_solution(solution, cache, W):
    assert is_acyclic(solution.dag)
    ok, violations = validate_td(solution.td, moralize(solution.dag))
    assert ok, violations
    assert solution.td.width <= W
    assert solution.score == pytest.approx(dag_score(cache, solution.dag))


@pytest.mark.parametrize("W", [1, 2, 3])
def test_greedy_initial_is_valid(make_cache, W):
    rng = np.random.default_rng(W)
    for seed in range(10):
        cache = make_cache(rng, int(rng.integers(2, 12)), max_parent_size=3, max_entries=6)
        _check_solution(greedy_initial(cache, W, seed), cache, W)


def test_greedy_initial_without_parent_sets():
    cache = ScoreCache({v: [((), -float(v + 1))] for v in range(5)})
    solution = greedy_initial(cache, 2, 0)
    assert solution.dag == Dag.empty(5)
    assert solution.score == cache.alpha(range(5))


def test_greedy_initial_learns_small_network_exactly():
    cache = ScoreCache({
        0: [((), -10.0)],
        1: [((), -10.0)],
        2: [((), -10.0), ((0,), -8.0), ((0, 1), -5.0)],
    })
    solution = greedy_initial(cache, 2, 0)
    assert solution.dag.parent_set(2) == {0, 1}
    assert solution.score == -25.0


def test_greedy_initial_is_seeded(make_cache, rng):
    cache = make_cache(rng, 9)
    assert greedy_initial(cache, 2, 4).dag == greedy_initial(cache, 2, 4).dag


def test_greedy_initial_needs_positive_bound(make_cache, rng):
    with pytest.raises(InputError):
        greedy_initial(make_cache(rng, 3), 0, 0)


def test_dag_text_with_scores():
    cache = ScoreCache({0: [((), -5.0)], 1: [((), -7.0), ((0,), -6.5)]})
    text = format_dag(Dag.from_arcs(2, [(0, 1)]), cache.score)
    assert text == "0 <- [] : -5.0\n1 <- [0] : -6.5\n"
    assert parse_dag(text) == Dag.from_arcs(2, [(0, 1)])


def test_parse_dag_fills_missing_vertices():
    assert parse_dag("3 <- [0, 1]\n", vertex_count=5).parent_set(4) == frozenset()
    with pytest.raises(InputError):
        parse_dag("7 <- []\n", vertex_count=5)
    with pytest.raises(InputError):
        parse_dag("1 -> 2\n")


@pytest.fixture
def clique_cache():
    return ScoreCache({
        0: [((), -10.0)],
        1: [((), -10.0), ((0,), -9.0)],
        2: [((), -10.0), ((0, 1), -6.0)],
    })


def test_import_empty_dag(tmp_path, clique_cache):
    path = tmp_path / "empty.dag"
    write_dag(Dag.empty(3), path, clique_cache.score)
    solution, cache = import_initial(path, None, clique_cache, 1)
    assert solution.td.width == 0
    assert solution.score == -30.0
    assert cache is clique_cache


def test_import_rejects_too_wide_dag(tmp_path, clique_cache):
    path = tmp_path / "clique.dag"
    write_dag(Dag.from_arcs(3, [(0, 1), (0, 2), (1, 2)]), path, clique_cache.score)
    with pytest.raises(InitialSolutionError, match="exceeds treewidth bound"):
        import_initial(path, None, clique_cache, 1)
    solution, _ = import_initial(path, None, clique_cache, 2)
    assert solution.score == -25.0


def test_import_rejects_cycles(tmp_path, clique_cache):
    path = tmp_path / "cycle.dag"
    path.write_text("0 <- [1]\n1 <- [0]\n2 <- []\n")
    with pytest.raises(InitialSolutionError, match="cycle"):
        import_initial(path, None, clique_cache, 2)


def test_import_scores_unknown_parent_sets(tmp_path, clique_cache):
    path = tmp_path / "new.dag"
    data = Dataset.from_rows([[0, 1, 0], [1, 0, 1], [0, 0, 0], [1, 1, 1]])
    write_dag(Dag.from_arcs(3, [(2, 0)]), path, partial(bic_score, data))
    with pytest.raises(InitialSolutionError, match="not in the score cache"):
        import_initial(path, None, clique_cache, 1)

    solution, cache = import_initial(path, None, clique_cache, 1, data)
    assert (0, {2}) in cache
    assert (0, {2}) not in clique_cache
    assert solution.score == pytest.approx(dag_score(cache, solution.dag))


def test_import_with_decomposition(tmp_path, clique_cache):
    dag_path, td_path = tmp_path / "in.dag", tmp_path / "in.td"
    write_dag(Dag.from_arcs(3, [(0, 1)]), dag_path, clique_cache.score)
    write_td(TreeDecomposition.single_bag({0, 1, 2}), 3, td_path)
    solution, _ = import_initial(dag_path, td_path, clique_cache, 2)
    assert solution.td.width == 2

    write_td(TreeDecomposition.single_bag({0, 1, 2}), 4, td_path)
    with pytest.raises(InitialSolutionError, match="over 4 vertices"):
        import_initial(dag_path, td_path, clique_cache, 2)

    write_td(TreeDecomposition.single_bag({0, 2}), 3, td_path)
    with pytest.raises(InitialSolutionError, match="invalid initial tree decomposition"):
        import_initial(dag_path, td_path, clique_cache, 2)


def test_import_greedy_output(tmp_path, make_cache, rng):
    cache = make_cache(rng, 12, max_parent_size=3, max_entries=6)
    initial = greedy_initial(cache, 5, 1)
    write_dag(initial.dag, tmp_path / "g.dag", cache.score)
    write_td(initial.td, cache.vertex_count, tmp_path / "g.td")
    assert read_dag(tmp_path / "g.dag") == initial.dag
    lines = (tmp_path / "g.dag").read_text().splitlines()
    written = [float(line.split(" : ")[1]) for line in lines]
    assert written == [cache.score(v, initial.dag.parent_set(v)) for v in range(12)]
    solution, _ = import_initial(tmp_path / "g.dag", tmp_path / "g.td", cache, 5)
    assert solution.score == pytest.approx(initial.score)
    assert solution.td.width <= 5
