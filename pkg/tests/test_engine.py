import networkx as nx
import numpy as np
import pytest

from twbn_slim.bench import generate_synthetic
from twbn_slim.encoding import DecodedLocal, MaxSatModel, decode, encode, model_for_choice
from twbn_slim.engine import EngineState, SlimEngine, global_verify, merge, run, verify_local
from twbn_slim.errors import SubinstanceError
from twbn_slim.graphs import Dag, EliminationOrdering, TreeDecomposition, moralize, td_from_elimination, validate_td
from twbn_slim.heuristic import InitialSolution, greedy_initial
from twbn_slim.scoring import ScoreCache, build_cache, dag_score, delta_bic
from twbn_slim.solvers import OracleSolver, Rc2Solver, SolverBackend, SolveStatus, best_choice
from twbn_slim.subinstance import assemble_subinstance, build_subinstance


@pytest.fixture
def external_path(external_path_cache):
    dag = Dag.from_arcs(5, [(1, 4), (4, 2)])
    td = TreeDecomposition(nx.Graph([(0, 1)]), {0: {0, 1, 2, 3}, 1: {1, 2, 4}})
    return dag, td, assemble_subinstance(external_path_cache, dag, td, {0})


def _local(problem, sub, choice):
    return decode(problem, model_for_choice(problem, sub, choice), sub)


class BogusSolver(SolverBackend):
    """Claims every variable is true."""

    name = "bogus"

    def _solve(self, problem, sub, timeout):
        assignment = {x: True for x in range(1, problem.variables.count + 1)}
        return SolveStatus.SATISFIABLE, MaxSatModel(assignment, problem.top), ""


def test_merge_incumbent_keeps_solution(external_path, external_path_cache):
    dag, td, sub = external_path
    problem = encode(sub, 2)
    result = merge(dag, td, sub, _local(problem, sub, sub.incumbent), external_path_cache)
    assert result.dag == dag
    assert result.delta == 0.0
    assert global_verify(result.dag, result.td, external_path_cache, 2)[0]
    assert {frozenset({1, 2, 4})} <= set(result.td.bags.values())


def test_merge_improvement_through_virtual_arc(external_path, external_path_cache):
    dag, td, sub = external_path
    problem = encode(sub, 2)
    weight, choice = best_choice(sub, 2)
    local = _local(problem, sub, choice)
    assert verify_local(sub, local, 2) == (True, [])
    result = merge(dag, td, sub, local, external_path_cache)
    assert result.dag.parent_set(1) == {2}
    assert result.dag.parent_set(2) == frozenset()
    assert result.dag.parent_set(4) == {1}
    assert result.delta == pytest.approx((weight - sub.current_weight) / sub.weight_scale)
    ok, report = global_verify(result.dag, result.td, external_path_cache, 2, dag_score(external_path_cache, dag) + 1.0)
    assert ok, report


def test_merge_whole_tree(make_cache, rng):
    cache = make_cache(rng, 5)
    initial = greedy_initial(cache, 2, 0)
    sub = assemble_subinstance(cache, initial.dag, initial.td, initial.td.bags)
    assert sub.boundary == frozenset()
    problem = encode(sub, 2)
    _, choice = best_choice(sub, 2)
    local = _local(problem, sub, choice)
    result = merge(initial.dag, initial.td, sub, local, cache)
    assert set(result.td.bags.values()) == set(local.td.bags.values())
    assert global_verify(result.dag, result.td, cache, 2)[0]


def test_verify_local_accepts_incumbent(external_path):
    _, _, sub = external_path
    problem = encode(sub, 2)
    assert verify_local(sub, _local(problem, sub, sub.incumbent), 2) == (True, [])


def test_verify_local_catches_virtual_cycle(external_path):
    _, _, sub = external_path
    choice = {0: frozenset(), 1: frozenset({2}), 2: frozenset({4}), 3: frozenset()}
    order = EliminationOrdering((0, 1, 2, 3))
    local = DecodedLocal(choice, (0, 2, 1, 3), order, td_from_elimination(order, sub.extended_moral_graph(choice)), 0)
    ok, violations = verify_local(sub, local, 2)
    assert not ok
    assert len(violations) == 1
    assert violations[0].startswith("C5")


def test_verify_local_catches_width():
    cache = ScoreCache({0: [((), -10.0)], 1: [((), -10.0)], 2: [((), -10.0), ((0, 1), -5.0)]})
    sub = assemble_subinstance(cache, Dag.empty(3), TreeDecomposition.single_bag(range(3)), {0})
    choice = {0: frozenset(), 1: frozenset(), 2: frozenset({0, 1})}
    order = EliminationOrdering((0, 1, 2))
    local = DecodedLocal(choice, (0, 1, 2), order, td_from_elimination(order, sub.extended_moral_graph(choice)), 0)
    ok, violations = verify_local(sub, local, 1)
    assert not ok
    assert any(x.startswith("C2") for x in violations)


def test_verify_local_catches_uncovered_edge(external_path):
    _, _, sub = external_path
    order = EliminationOrdering((0, 1, 2, 3))
    covering = TreeDecomposition(nx.Graph([(0, 1)]), {0: {1, 2}, 1: {0, 3}})
    assert verify_local(sub, DecodedLocal(sub.incumbent, (0, 1, 2, 3), order, covering, 0), 2)[0]
    # the virtual edge {1, 2} is in no bag
    broken = TreeDecomposition(nx.Graph([(0, 1)]), {0: {1}, 1: {0, 2, 3}})
    ok, violations = verify_local(sub, DecodedLocal(sub.incumbent, (0, 1, 2, 3), order, broken, 0), 2)
    assert not ok
    assert len(violations) == 1
    assert violations[0].startswith("C3: edge {")


def test_global_verify(external_path, external_path_cache):
    dag, td, _ = external_path
    assert global_verify(dag, td, external_path_cache, 3) == (True, [])
    assert global_verify(dag, td, external_path_cache, 2) == (False, ["width 3 exceeds 2"])
    ok, report = global_verify(dag, td, external_path_cache, 3, expected_score=0.0)
    assert not ok
    assert report[0].startswith("score -43.0 differs")


def test_global_verify_dropped_bag_edge():
    cache = ScoreCache({0: [((), -1.0)], 1: [((), -1.0), ((0,), -0.5)], 2: [((), -1.0), ((1,), -0.5)]})
    dag = Dag.from_arcs(3, [(0, 1), (1, 2)])
    td = TreeDecomposition(nx.Graph([(0, 1), (1, 2)]), {0: {0, 1}, 1: {1}, 2: {1, 2}})
    assert global_verify(dag, td, cache, 1)[0]
    broken = TreeDecomposition(nx.Graph([(0, 1)]), td.bags)
    ok, report = global_verify(dag, broken, cache, 1)
    assert not ok
    assert "bags containing vertex 1 are not connected" in report


def test_global_verify_too_wide():
    cache = ScoreCache({0: [((), -1.0)], 1: [((), -1.0), ((0,), -0.5)], 2: [((), -1.0), ((0, 1), -0.2)]})
    dag = Dag.from_arcs(3, [(0, 1), (0, 2), (1, 2)])
    ok, report = global_verify(dag, TreeDecomposition.single_bag(range(3)), cache, 1)
    assert not ok
    assert report == ["width 2 exceeds 1"]


def test_run_without_time_returns_initial(make_cache, rng):
    cache = make_cache(rng, 8)
    initial = greedy_initial(cache, 2, 0)
    state = run(cache, initial, 2, budget=5, total_time=0.0, backend=OracleSolver())
    assert state.iteration == 0
    assert state.dag == initial.dag
    assert state.score == initial.score
    assert state.verified


def test_run_needs_budget_above_bag_size(make_cache, rng):
    cache = make_cache(rng, 8)
    initial = greedy_initial(cache, 3, 0)
    with pytest.raises(SubinstanceError):
        run(cache, initial, 3, budget=1, total_time=1.0, backend=OracleSolver())


def test_run_reaches_optimum_of_external_path(external_path, external_path_cache, optimum):
    dag, td, _ = external_path
    initial = InitialSolution(dag, td, dag_score(external_path_cache, dag))
    state = run(external_path_cache, initial, 3, budget=5, total_time=30.0, backend=OracleSolver(), max_iterations=2)
    assert optimum(external_path_cache, 3) == -41.0
    assert state.score == pytest.approx(-41.0)
    assert state.verified


def test_run_reaches_global_optimum_on_five_variables(make_cache, optimum):
    rng = np.random.default_rng(99)
    for seed in range(20):
        cache = make_cache(rng, 5, max_parent_size=3, max_entries=3)
        initial = greedy_initial(cache, 2, seed)
        state = run(cache, initial, 2, budget=5, total_time=60.0, seed=seed, backend=OracleSolver(),
                    max_iterations=2)
        assert state.score == pytest.approx(optimum(cache, 2), abs=1e-6)
        assert state.verified


def _step_run(cache, initial, W, budget, backend, iterations, seed, exact_weights=True):
    """Drive the engine one subinstance at a time and check the global solution after each step."""
    engine = SlimEngine(cache, backend, W, budget)
    state = EngineState(initial.dag, initial.td, initial.score, np.random.default_rng(seed))
    scores = [state.score]
    for i in range(1, iterations + 1):
        attempt = engine.attempt(state.version, state.dag, state.td, state.rng, 5.0, i)
        if attempt is not None and engine.apply(state, attempt, i):
            improvement = state.improvements[-1]
            assert state.score - scores[-1] == pytest.approx(improvement.delta_k / engine.weight_scale,
                                                             abs=2 / engine.weight_scale)
        ok, report = global_verify(state.dag, state.td, cache, W, state.score)
        assert ok, report
        scores.append(state.score)
    assert scores == sorted(scores)
    if exact_weights:
        assert state.discarded == 0
    return state


def test_every_merge_keeps_a_valid_solution(make_cache):
    rng = np.random.default_rng(5)
    for seed in range(6):
        W = int(rng.choice([2, 3]))
        cache = make_cache(rng, int(rng.integers(8, 16)), max_parent_size=3, max_entries=3)
        initial = greedy_initial(cache, W, seed)
        _step_run(cache, initial, W, max(5, W + 1), OracleSolver(), 8, seed)


@pytest.mark.slow
def test_every_merge_keeps_a_valid_solution_with_rc2(make_cache):
    pytest.importorskip("pysat")
    rng = np.random.default_rng(6)
    for seed in range(100):
        W = int(rng.choice([2, 3]))
        cache = make_cache(rng, int(rng.integers(8, 16)), max_parent_size=3, max_entries=5)
        initial = greedy_initial(cache, W, seed)
        _step_run(cache, initial, W, 8, Rc2Solver(), 20, seed)


@pytest.mark.parametrize("gain, accepted", [(0.00149, False), (0.0012, True)])
def test_merges_outside_the_rounding_slack_are_discarded(gain, accepted):
    # six vertices each gain slightly from parent 0; every weight rounds to 1
    cache = ScoreCache({0: [((), -10.0)], **{v: [((), -10.0), ((0,), -10.0 + gain)] for v in range(1, 7)}})
    dag = Dag.empty(7)
    td = TreeDecomposition(nx.path_graph(7), {b: {b} for b in range(7)})
    initial = InitialSolution(dag, td, dag_score(cache, dag))
    state = run(cache, initial, 1, budget=7, total_time=30.0, backend=OracleSolver(), max_iterations=1)
    if accepted:
        assert state.discarded == 0
        assert state.score == pytest.approx(initial.score + 6 * gain)
        assert [i.delta_k for i in state.improvements] == [6]
    else:
        assert state.discarded == 1
        assert state.dag == dag
        assert state.improvements == []
    assert state.verified


def test_every_merge_keeps_a_valid_solution_on_bic_scores():
    for seed in range(3):
        data, _ = generate_synthetic(8, max_parents=2, N=300, seed=seed)
        cache = build_cache(data, 1)
        initial = greedy_initial(cache, 1, seed)
        _step_run(cache, initial, 1, 4, OracleSolver(), 6, seed, exact_weights=False)


def test_bogus_models_are_discarded(make_cache, rng):
    cache = make_cache(rng, 8)
    initial = greedy_initial(cache, 2, 0)
    state = run(cache, initial, 2, budget=5, total_time=30.0, backend=BogusSolver(), max_iterations=5)
    assert state.discarded == 5
    assert state.dag == initial.dag
    assert state.improvements == []
    assert state.verified


def test_stale_attempts_are_dropped(make_cache, rng):
    cache = make_cache(rng, 8)
    initial = greedy_initial(cache, 2, 0)
    engine = SlimEngine(cache, OracleSolver(), 2, 5)
    state = EngineState(initial.dag, initial.td, initial.score, rng, version=3)
    attempt = engine.attempt(2, state.dag, state.td, rng, 1.0, 1)
    assert not engine.apply(state, attempt, 1)
    assert state.discarded == 0


def test_parallel_run(make_cache, rng):
    cache = make_cache(rng, 12, max_entries=3)
    initial = greedy_initial(cache, 2, 0)
    seen = []
    state = run(cache, initial, 2, budget=5, total_time=60.0, backend=OracleSolver(), max_iterations=12,
                workers=3, on_improvement=seen.append, verify_each=True)
    assert state.iteration == 12
    assert state.verified
    assert [x.score for x in seen] == sorted(x.score for x in seen)
    assert state.score >= initial.score


def test_dump_dir(tmp_path, make_cache, rng):
    cache = make_cache(rng, 8)
    initial = greedy_initial(cache, 2, 0)
    run(cache, initial, 2, budget=5, total_time=30.0, backend=OracleSolver(), max_iterations=2, dump_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "iter00001.sub.txt", "iter00001.varmap", "iter00001.wcnf",
        "iter00002.sub.txt", "iter00002.varmap", "iter00002.wcnf",
    ]
    assert (tmp_path / "iter00001.wcnf").read_text().startswith("p wcnf ")


def test_engine_state_stays_decomposable(make_cache, rng):
    cache = make_cache(rng, 10)
    initial = greedy_initial(cache, 2, 0)
    state = run(cache, initial, 2, budget=5, total_time=30.0, backend=OracleSolver(), max_iterations=5)
    assert validate_td(state.td, moralize(state.dag))[0]
    sub = build_subinstance(cache, state.dag, state.td, 5, rng)
    assert all(sub.menu_entry(v, state.dag.parent_set(v)).parents == sub.incumbent[v] for v in sub.vertices)


@pytest.mark.slow
def test_anytime_gain_on_fifty_variables():
    pytest.importorskip("pysat")
    gains = []
    for seed in range(3):
        data, _ = generate_synthetic(50, max_parents=3, N=5000, seed=seed)
        cache = build_cache(data, 2)
        initial = greedy_initial(cache, 2, seed)
        state = run(cache, initial, 2, budget=10, total_time=60.0, seed=seed, backend=Rc2Solver())
        assert state.verified
        gains.append(delta_bic(initial.score, state.score).delta)
    assert sum(g >= 10 for g in gains) >= 2, gains
