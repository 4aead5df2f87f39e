from twbn_slim.config import SolverConfig
from twbn_slim.solvers.backend import SolveOutcome, SolverBackend, SolveStatus
from twbn_slim.solvers.external import ExternalSolver, parse_solver_output
from twbn_slim.solvers.oracle import OracleSolver, best_choice
from twbn_slim.solvers.rc2 import Rc2Solver


def make_backend(config: SolverConfig) -> SolverBackend:
    if config.mode == "oracle":
        return OracleSolver()
    if config.mode == "rc2":
        return Rc2Solver()
    return ExternalSolver(config)


__all__ = [
    "ExternalSolver",
    "OracleSolver",
    "Rc2Solver",
    "SolveOutcome",
    "SolveStatus",
    "SolverBackend",
    "best_choice",
    "make_backend",
    "parse_solver_output",
]
