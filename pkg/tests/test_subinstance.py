import networkx as nx
import numpy as np
import pytest

from twbn_slim.errors import SubinstanceError
from twbn_slim.graphs import Dag, TreeDecomposition
from twbn_slim.heuristic import greedy_initial
from twbn_slim.scoring import ScoreCache
from twbn_slim.subinstance import (
    assemble_subinstance,
    build_subinstance,
    classify_vertices,
    compute_virtual_arcs,
    filter_menu,
    select_subtree,
    virtual_edges,
)


def _path_td(*bags) -> TreeDecomposition:
    return TreeDecomposition(nx.path_graph(len(bags)), dict(enumerate(bags)))


@pytest.fixture
def external_path():
    """1 -> 4 -> 2 with 4 outside the selected bag 0."""
    dag = Dag.from_arcs(5, [(1, 4), (4, 2)])
    td = TreeDecomposition(nx.Graph([(0, 1)]), {0: {0, 1, 2, 3}, 1: {1, 2, 4}})
    return dag, td


def test_whole_tree_fits():
    td = _path_td({0, 1}, {1, 2}, {2, 3})
    assert select_subtree(td, 4, 0) == {0, 1, 2}
    boundary, internal = classify_vertices(td, {0, 1, 2})
    assert boundary == frozenset()
    assert internal == {0, 1, 2, 3}


def test_subtree_from_middle_root_is_bfs_ordered():
    td = _path_td({0, 1}, {1, 2}, {2, 3})
    selections = {select_subtree(td, 3, seed) for seed in range(40)}
    # roots 0 and 2 reach their neighbour; root 1 takes bag 0 first, then bag 2 no longer fits
    assert selections == {frozenset({0, 1}), frozenset({1, 2})}


def test_subtree_never_exceeds_budget(make_cache, rng):
    for seed in range(20):
        cache = make_cache(rng, 12)
        initial = greedy_initial(cache, 2, seed)
        selected = select_subtree(initial.td, 5, rng)
        covered = frozenset().union(*(initial.td.bags[b] for b in selected))
        assert len(covered) <= 5
        assert nx.is_connected(initial.td.tree.subgraph(selected))


def test_subtree_with_disjoint_bags_keeps_root_only():
    td = _path_td({0, 1}, {2, 3}, {4, 5})
    for seed in range(10):
        assert len(select_subtree(td, 2, seed)) == 1


def test_budget_below_every_bag():
    with pytest.raises(SubinstanceError, match="budget below max bag size"):
        select_subtree(_path_td({0, 1, 2}, {2, 3, 4}), 2, 0)


def test_leaf_boundary():
    td = _path_td({0, 1}, {1, 2})
    boundary, internal = classify_vertices(td, {0})
    assert boundary == {1}
    assert internal == {0}


def test_boundary_of_branching_subtree():
    tree = nx.Graph([(0, 1), (0, 2), (0, 3), (3, 4)])
    bags = {0: {0, 1, 2, 3}, 1: {0, 1, 5}, 2: {2, 6}, 3: {3, 2, 7}, 4: {7, 8}}
    td = TreeDecomposition(tree, bags)
    boundary, internal = classify_vertices(td, {0, 3})
    assert boundary == {0, 1, 2, 7}
    assert internal == {3}
    assert virtual_edges(td, {0, 3}, boundary) == {(0, 1)}


def test_virtual_edges():
    td = TreeDecomposition(nx.Graph([(0, 1), (0, 2)]), {0: {0, 1, 2, 3}, 1: {2, 3, 4}, 2: {0, 5}})
    boundary, _ = classify_vertices(td, {0})
    assert boundary == {0, 2, 3}
    # 0 and 2 share the selected bag but no outside bag
    assert virtual_edges(td, {0}, boundary) == {(2, 3)}
    assert virtual_edges(td, {0}, ()) == frozenset()


def test_virtual_arc_through_external_vertex(external_path):
    dag, _ = external_path
    assert compute_virtual_arcs(dag, {0, 1, 2, 3}, 2, {4}) == {(1, 2)}
    assert compute_virtual_arcs(dag, {0, 1, 2, 3}, 3, {0, 1}) == frozenset()


def test_virtual_arc_through_chain_of_externals():
    dag = Dag.from_arcs(7, [(0, 4), (4, 5), (5, 6)])
    assert compute_virtual_arcs(dag, {0, 1, 2, 3}, 2, {6}) == {(0, 2)}
    assert compute_virtual_arcs(dag, {0, 1, 2, 3}, 0, {6}) is None


def test_virtual_arc_loop_is_rejected(external_path):
    dag, _ = external_path
    assert compute_virtual_arcs(dag, {0, 1, 2, 3}, 1, {4}) is None


def test_filter_menu(external_path, external_path_cache):
    dag, td = external_path
    # an internal vertex only keeps parent sets inside V_S
    menu_0 = filter_menu(external_path_cache, td, {0}, dag, 0)
    assert [e.parents for e in menu_0] == [frozenset()]

    menu_2 = {e.parents: e for e in filter_menu(external_path_cache, td, {0}, dag, 2)}
    assert set(menu_2) == {frozenset(), frozenset({4})}
    assert menu_2[frozenset({4})].forced_arcs == {(1, 2)}
    assert menu_2[frozenset({4})].offset == 4.0
    assert menu_2[frozenset({4})].weight == 4000


def test_filter_menu_needs_an_outside_witness_bag(external_path_cache):
    dag = Dag.from_arcs(5, [(1, 4)])
    td = TreeDecomposition(nx.Graph([(0, 1)]), {0: {0, 1, 2, 3}, 1: {1, 4}})
    menu = filter_menu(external_path_cache, td, {0}, dag, 2)
    assert [e.parents for e in menu] == [frozenset()]


def test_filter_menu_drops_worse_than_empty_unless_current():
    cache = ScoreCache({0: [((), -3.0), ((1,), -5.0)], 1: [((), -1.0)]})
    td = TreeDecomposition.single_bag({0, 1})
    assert [e.parents for e in filter_menu(cache, td, {0}, Dag.empty(2), 0)] == [frozenset()]
    kept = filter_menu(cache, td, {0}, Dag.from_arcs(2, [(1, 0)]), 0)
    assert {e.parents: e.weight for e in kept} == {frozenset(): 0, frozenset({1}): -2000}


def test_assemble_subinstance(external_path, external_path_cache):
    dag, td = external_path
    sub = assemble_subinstance(external_path_cache, dag, td, {0})
    assert sub.vertices == (0, 1, 2, 3)
    assert sub.boundary == {1, 2}
    assert sub.virtual_edges == {(1, 2)}
    assert sub.incumbent[2] == {4}
    assert sub.current_weight == 4000
    assert sub.alpha == -40.0
    assert sub.outside_bags == (frozenset({1, 2, 4}),)
    assert "virtual edges: [(1, 2)]" in sub.describe()


def test_local_graphs(external_path, external_path_cache):
    dag, td = external_path
    sub = assemble_subinstance(external_path_cache, dag, td, {0})
    choice = {0: frozenset(), 1: frozenset({2}), 2: frozenset({4}), 3: frozenset()}
    digraph = sub.local_digraph(choice)
    assert set(digraph.edges()) == {(2, 1), (1, 2)}
    moral = sub.extended_moral_graph(choice)
    assert {frozenset(e) for e in moral.edges()} == {frozenset({1, 2})}


def test_build_subinstance_keeps_incumbent_admissible(make_cache):
    rng = np.random.default_rng(8)
    for seed in range(25):
        cache = make_cache(rng, int(rng.integers(6, 14)))
        initial = greedy_initial(cache, 2, seed)
        sub = build_subinstance(cache, initial.dag, initial.td, 6, rng)
        assert len(sub.vertices) <= 6
        for v in sub.vertices:
            entry = sub.menu_entry(v, initial.dag.parent_set(v))
            assert entry.parents == sub.incumbent[v]
            assert all(e.offset >= 0 or e.parents == sub.incumbent[v] for e in sub.menus[v])
        for v in sub.internal:
            assert all(e.parents <= sub.vertex_set for e in sub.menus[v])
