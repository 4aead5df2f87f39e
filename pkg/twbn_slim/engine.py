import logging
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import networkx as nx
import numpy as np

from twbn_slim.config import DEFAULT_BUDGET, DEFAULT_SOLVER_TIMEOUT, DEFAULT_WEIGHT_SCALE
from twbn_slim.encoding import DecodedLocal, MaxSatProblem, decode, emit_varmap, emit_wcnf, encode
from twbn_slim.errors import InputError, MergeError, MissingParentSetError, SolverProtocolError, SubinstanceError
from twbn_slim.graphs import Dag, TreeDecomposition, is_acyclic, moralize, validate_td
from twbn_slim.heuristic import InitialSolution
from twbn_slim.scoring import ScoreCache, dag_score
from twbn_slim.solvers import SolveOutcome, SolverBackend, Rc2Solver
from twbn_slim.subinstance import Subinstance, build_subinstance

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-6
# accepted merges keep |delta f - (K - K_0) / scale| within this many weight units
IDENTITY_SLACK = 2


@dataclass(frozen=True)
class Improvement:
    iteration: int
    delta_k: int
    score: float
    wall_time: float


@dataclass
class EngineState:
    dag: Dag
    td: TreeDecomposition
    score: float
    rng: np.random.Generator
    iteration: int = 0
    elapsed: float = 0.0
    version: int = 0
    improvements: list[Improvement] = field(default_factory=list)
    discarded: int = 0
    verified: bool = True


@dataclass(frozen=True)
class MergeResult:
    dag: Dag
    td: TreeDecomposition
    delta: float


def merge(dag: Dag, td: TreeDecomposition, sub: Subinstance, local: DecodedLocal, cache: ScoreCache) -> MergeResult:
    """Glue a local solution into (D, T).

    The selected bags are replaced by the local decomposition; every remaining component T_i of
    the tree is reattached through its old neighbour t_i of S to a local bag holding B_i, the
    vertices T_i shares with V_S. External bags keep their contents.
    """
    new_dag = dag.with_parents(local.parents)
    delta = sum(cache.score(v, local.parents[v]) - cache.score(v, dag.parent_set(v)) for v in sub.vertices)

    selected = sub.selected_bags
    first_id = max(td.bags) + 1
    local_td = local.td.relabel(first_id)
    tree = nx.Graph(local_td.tree)
    bags = dict(local_td.bags)
    rest = td.tree.subgraph(b for b in td.bags if b not in selected)
    tree.add_edges_from(rest.edges())
    tree.add_nodes_from(rest.nodes())
    bags.update({b: td.bags[b] for b in rest.nodes()})

    for component in nx.connected_components(rest):
        links = [(s, t) for t in component for s in td.tree.neighbors(t) if s in selected]
        if len(links) != 1:
            raise MergeError(f"component {sorted(component)} touches the subtree {len(links)} times")
        _, t = links[0]
        shared = frozenset().union(*(td.bags[b] for b in component)) & sub.vertex_set
        anchor = next((b for b in sorted(local_td.bags) if shared <= local_td.bags[b]), None)
        if anchor is None:
            raise MergeError(f"no local bag contains {sorted(shared)}")
        tree.add_edge(anchor, t)

    new_td = TreeDecomposition(tree, bags).compress().relabel()
    return MergeResult(new_dag, new_td, delta)


def verify_local(sub: Subinstance, local: DecodedLocal, W: int) -> tuple[bool, list[str]]:
    """Check a local solution without trusting the encoder; returns (ok, violations)."""
    violations = []
    missing = [v for v in sub.vertices if v not in local.parents]
    if missing:
        return False, [f"no parent set chosen for {missing}"]
    unknown = [v for v in sub.vertices if all(e.parents != local.parents[v] for e in sub.menus[v])]
    if unknown:
        return False, [f"parent set of {v} is not in its menu" for v in unknown]

    local_arcs = nx.DiGraph()
    local_arcs.add_nodes_from(sub.vertices)
    local_arcs.add_edges_from((u, v) for v in sub.vertices for u in local.parents[v] & sub.vertex_set)
    if not nx.is_directed_acyclic_graph(local_arcs):
        violations.append("C1: local DAG has a cycle")

    graph = sub.extended_moral_graph(local.parents)
    try:
        ok, td_violations = validate_td(local.td, graph)
    except InputError as e:
        ok, td_violations = False, []
        violations.append(f"C3: {e}")
    if not ok:
        violations.extend(f"C3: {x.message}" for x in td_violations)
    if local.td.vertices() != sub.vertex_set:
        violations.append("C3: local decomposition does not cover V_S exactly")
    if local.td.width > W:
        violations.append(f"C2: local width {local.td.width} > {W}")

    for v in sub.vertices:
        parents = local.parents[v]
        if not parents <= sub.vertex_set and not any(parents | {v} <= bag for bag in sub.outside_bags):
            violations.append(f"C4: no outside bag holds {sorted(parents)} with {v}")

    if not nx.is_directed_acyclic_graph(sub.local_digraph(local.parents)):
        violations.append("C5: local arcs with virtual arcs have a cycle")
    return not violations, violations


def global_verify(dag: Dag, td: TreeDecomposition, cache: ScoreCache, W: int,
                  expected_score: Optional[float] = None) -> tuple[bool, list[str]]:
    report = []
    if not is_acyclic(dag):
        report.append("DAG has a directed cycle")
    try:
        ok, violations = validate_td(td, moralize(dag))
        report.extend(x.message for x in violations)
    except InputError as e:
        report.append(str(e))
    if td.width > W:
        report.append(f"width {td.width} exceeds {W}")
    try:
        score = dag_score(cache, dag)
        if expected_score is not None and abs(score - expected_score) > SCORE_TOLERANCE:
            report.append(f"score {score!r} differs from the tracked {expected_score!r}")
    except MissingParentSetError as e:
        report.append(str(e))
    return not report, report


@dataclass(frozen=True)
class _Attempt:
    version: int
    sub: Subinstance
    problem: MaxSatProblem
    outcome: SolveOutcome


class SlimEngine:
    def __init__(self, cache: ScoreCache, backend: SolverBackend, W: int, budget: int = DEFAULT_BUDGET,
                 per_call_timeout: float = DEFAULT_SOLVER_TIMEOUT, weight_scale: int = DEFAULT_WEIGHT_SCALE,
                 verify_each: bool = False, dump_dir: Optional[Union[str, Path]] = None):
        self.cache = cache
        self.backend = backend
        self.W = W
        self.budget = budget
        self.per_call_timeout = per_call_timeout
        self.weight_scale = weight_scale
        self.verify_each = verify_each
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        if self.dump_dir is not None:
            self.dump_dir.mkdir(parents=True, exist_ok=True)

    def attempt(self, version: int, dag: Dag, td: TreeDecomposition,
                rng: np.random.Generator, timeout: float, iteration: int) -> Optional[_Attempt]:
        """Build, encode and solve one subinstance of the given incumbent."""
        try:
            sub = build_subinstance(self.cache, dag, td, self.budget, rng, self.weight_scale)
        except SubinstanceError as e:
            logger.warning("iteration %d: %s", iteration, e)
            return None
        problem = encode(sub, self.W, self.weight_scale)
        if self.dump_dir is not None:
            (self.dump_dir / f"iter{iteration:05d}.sub.txt").write_text(sub.describe())
            (self.dump_dir / f"iter{iteration:05d}.wcnf").write_bytes(emit_wcnf(problem))
            (self.dump_dir / f"iter{iteration:05d}.varmap").write_text(emit_varmap(problem))
        outcome = self.backend.solve(problem, sub, timeout)
        return _Attempt(version, sub, problem, outcome)

    def apply(self, state: EngineState, attempt: _Attempt, iteration: int) -> bool:
        """Accept the attempt's model if it strictly improves the incumbent and passes every check."""
        if attempt.version != state.version:
            logger.debug("iteration %d: stale result discarded", iteration)
            return False
        model = attempt.outcome.model
        if model is None:
            logger.debug("iteration %d: %s %s", iteration, attempt.outcome.status.value, attempt.outcome.message)
            return False
        k0 = attempt.problem.current_weight
        if model.weight <= k0:
            return False

        try:
            local = decode(attempt.problem, model, attempt.sub)
            ok, violations = verify_local(attempt.sub, local, self.W)
            if not ok:
                raise SolverProtocolError("; ".join(violations))
            result = merge(state.dag, state.td, attempt.sub, local, self.cache)
        except (SolverProtocolError, MergeError) as e:
            logger.warning("iteration %d discarded: %s", iteration, e)
            state.discarded += 1
            return False

        predicted = (model.weight - k0) / self.weight_scale
        if result.delta < 0 or abs(result.delta - predicted) > IDENTITY_SLACK / self.weight_scale + 1e-9:
            logger.warning("iteration %d discarded: score change %.6f, predicted %.6f", iteration,
                           result.delta, predicted)
            state.discarded += 1
            return False

        new_score = dag_score(self.cache, result.dag)
        if self.verify_each:
            ok, report = global_verify(result.dag, result.td, self.cache, self.W, state.score + result.delta)
            if not ok:
                logger.warning("iteration %d discarded: %s", iteration, "; ".join(report))
                state.discarded += 1
                return False

        state.dag, state.td, state.score = result.dag, result.td, new_score
        state.version += 1
        improvement = Improvement(iteration, model.weight - k0, new_score, state.elapsed)
        state.improvements.append(improvement)
        logger.info("iteration %d: delta K %d, score %.6f at %.2fs", iteration, improvement.delta_k,
                    new_score, improvement.wall_time)
        return True

    def run(self, initial: InitialSolution, total_time: float, seed: int, max_iterations: Optional[int] = None,
            workers: int = 1, on_improvement: Optional[Callable[[Improvement], None]] = None) -> EngineState:
        if initial.td.max_bag_size > self.budget:
            raise SubinstanceError(f"budget below max bag size ({self.budget} < {initial.td.max_bag_size})")
        state = EngineState(initial.dag, initial.td, initial.score, np.random.default_rng(seed))
        start = time.monotonic()

        def remaining() -> float:
            state.elapsed = time.monotonic() - start
            return total_time - state.elapsed

        def more() -> bool:
            return remaining() > 0 and (max_iterations is None or state.iteration < max_iterations)

        def accepted(attempt: Optional[_Attempt], iteration: int) -> None:
            remaining()
            if attempt is not None and self.apply(state, attempt, iteration) and on_improvement is not None:
                on_improvement(state.improvements[-1])

        if workers <= 1:
            while more():
                state.iteration += 1
                timeout = min(self.per_call_timeout, remaining())
                attempt = self.attempt(state.version, state.dag, state.td, state.rng, timeout, state.iteration)
                accepted(attempt, state.iteration)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                pending = {}
                while more() or pending:
                    while more() and len(pending) < workers:
                        state.iteration += 1
                        rng = np.random.default_rng(state.rng.integers(2 ** 63))
                        timeout = min(self.per_call_timeout, remaining())
                        future = pool.submit(self.attempt, state.version, state.dag, state.td, rng,
                                             timeout, state.iteration)
                        pending[future] = state.iteration
                    done, _ = wait(pending, return_when=FIRST_COMPLETED)
                    for future in sorted(done, key=pending.__getitem__):
                        accepted(future.result(), pending.pop(future))

        remaining()
        state.verified, report = global_verify(state.dag, state.td, self.cache, self.W, state.score)
        if not state.verified:
            logger.error("final state failed verification: %s", "; ".join(report))
        logger.info("%d iterations, %d improvements, %d discarded, score %.6f", state.iteration,
                    len(state.improvements), state.discarded, state.score)
        return state


def run(cache: ScoreCache, initial: InitialSolution, W: int, budget: int = DEFAULT_BUDGET,
        per_call_timeout: float = DEFAULT_SOLVER_TIMEOUT, total_time: float = 60.0, seed: int = 0,
        backend: Optional[SolverBackend] = None, weight_scale: int = DEFAULT_WEIGHT_SCALE,
        max_iterations: Optional[int] = None, verify_each: bool = False, workers: int = 1,
        on_improvement: Optional[Callable[[Improvement], None]] = None,
        dump_dir: Optional[Union[str, Path]] = None) -> EngineState:
    engine = SlimEngine(cache, backend if backend is not None else Rc2Solver(), W, budget, per_call_timeout,
                        weight_scale, verify_each, dump_dir)
    return engine.run(initial, total_time, seed, max_iterations, workers, on_improvement)
