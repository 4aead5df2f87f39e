import logging
import multiprocessing as mp
from typing import Optional

from twbn_slim.encoding import Clause, MaxSatModel, MaxSatProblem
from twbn_slim.errors import InputError
from twbn_slim.solvers.backend import SolverBackend, SolveStatus
from twbn_slim.subinstance import Subinstance

logger = logging.getLogger(__name__)

# optional dependency
try:
    from pysat.examples.rc2 import RC2
    from pysat.formula import WCNF
except ImportError:
    RC2 = None


def _compute(hard: tuple[Clause, ...], soft: tuple[tuple[Clause, int], ...]) -> Optional[list[int]]:
    formula = WCNF()
    for clause in hard:
        formula.append(list(clause))
    for clause, weight in soft:
        formula.append(list(clause), weight=weight)
    with RC2(formula) as rc2:
        return rc2.compute()


def _worker(hard, soft, conn) -> None:
    try:
        conn.send(("ok", _compute(hard, soft)))
    except Exception as e:
        conn.send(("error", repr(e)))
    finally:
        conn.close()


class Rc2Solver(SolverBackend):
    """
    Exact solving with python-sat's RC2.

    Without a timeout the instance is solved in this process. With one, RC2 runs in a
    worker process that is terminated when the time is up; RC2 has no intermediate
    models, so an expired call reports UNKNOWN.
    """

    name = "rc2"

    def __init__(self, start_method: Optional[str] = None):
        if RC2 is None:
            raise InputError("rc2 mode needs the python-sat package")
        if start_method is None:
            start_method = "forkserver" if "forkserver" in mp.get_all_start_methods() else "spawn"
        self._context = mp.get_context(start_method)

    def _solve(self, problem: MaxSatProblem, sub: Subinstance, timeout: Optional[float]):
        compiled = problem.compiled
        if not compiled.hard and not compiled.soft:
            return SolveStatus.OPTIMUM, MaxSatModel({}, 0), ""
        if timeout is None:
            literals = _compute(compiled.hard, compiled.soft)
        else:
            kind, payload = self._run_worker(compiled.hard, compiled.soft, timeout)
            if kind == "timeout":
                return SolveStatus.UNKNOWN, None, f"timeout after {timeout:g}s"
            if kind == "error":
                return SolveStatus.ERROR, None, payload
            literals = payload
        if literals is None:
            return SolveStatus.ERROR, None, "hard clauses unsatisfiable"
        return SolveStatus.OPTIMUM, MaxSatModel.from_literals(literals, problem), ""

    def _run_worker(self, hard, soft, timeout: float) -> tuple[str, object]:
        receiver, sender = self._context.Pipe(duplex=False)
        process = self._context.Process(target=_worker, args=(hard, soft, sender), daemon=True)
        process.start()
        sender.close()
        try:
            if not receiver.poll(max(timeout, 0.0)):
                logger.debug("rc2 worker %d timed out after %.3fs", process.pid, timeout)
                return "timeout", None
            return receiver.recv()
        except EOFError:
            return "error", "rc2 worker exited without a result"
        finally:
            receiver.close()
            if process.is_alive():
                process.terminate()
            process.join()
