import logging
import shlex
import signal
import subprocess
import tempfile
from pathlib import Path
from typing import Optional

from twbn_slim.config import SolverConfig
from twbn_slim.encoding import MaxSatModel, MaxSatProblem, emit_wcnf
from twbn_slim.errors import InputError, SolverProtocolError
from twbn_slim.solvers.backend import SolverBackend, SolveStatus
from twbn_slim.subinstance import Subinstance

logger = logging.getLogger(__name__)

WCNF_PLACEHOLDER = "{wcnf}"


def parse_solver_output(output: str) -> tuple[Optional[str], Optional[list[int]]]:
    """Status word and last complete model from MaxSAT Evaluation style output.

    ``v`` lines may hold signed literals or one 0/1 string (bit i is variable i+1). Every
    ``o`` line starts a new model, so after an interrupt the last printed model wins.
    """
    status = None
    current: list[int] = []
    last: Optional[list[int]] = None
    for line in output.splitlines():
        line = line.strip()
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("o ") or line == "o":
            current = []
        elif line == "v" or line.startswith("v "):
            tokens = line[1:].split()
            if len(tokens) == 1 and tokens[0] and set(tokens[0]) <= {"0", "1"}:
                current = [i if bit == "1" else -i for i, bit in enumerate(tokens[0], start=1)]
            else:
                try:
                    current.extend(int(t) for t in tokens if t != "0")
                except ValueError:
                    raise SolverProtocolError(f"unparsable v line: {line!r}") from None
            last = list(current)
    return status, last


class ExternalSolver(SolverBackend):
    name = "external"

    def __init__(self, config: SolverConfig):
        if not config.command:
            raise InputError("external solver mode needs a solver command")
        self.config = config
        self.arguments = shlex.split(config.command)

    def _command(self, wcnf_path: str) -> list[str]:
        if not any(WCNF_PLACEHOLDER in arg for arg in self.arguments):
            return self.arguments + [wcnf_path]
        return [arg.replace(WCNF_PLACEHOLDER, wcnf_path) for arg in self.arguments]

    def _solve(self, problem: MaxSatProblem, sub: Subinstance, timeout: Optional[float]):
        timeout = self.config.timeout if timeout is None else timeout
        with tempfile.NamedTemporaryFile(suffix=".wcnf", delete=False) as temp_file:
            temp_file.write(emit_wcnf(problem))
        try:
            try:
                process = subprocess.Popen(self._command(temp_file.name), stdout=subprocess.PIPE,
                                           stderr=subprocess.PIPE, text=True)
            except OSError as e:
                return SolveStatus.ERROR, None, f"solver spawn failed: {e}"
            timed_out = False
            try:
                output, errors = process.communicate(timeout=timeout)
            except subprocess.TimeoutExpired:
                timed_out = True
                process.send_signal(signal.SIGINT)
                try:
                    output, errors = process.communicate(timeout=self.config.grace)
                except subprocess.TimeoutExpired:
                    process.kill()
                    output, errors = process.communicate()
        finally:
            Path(temp_file.name).unlink(missing_ok=True)

        try:
            status, literals = parse_solver_output(output)
        except SolverProtocolError as e:
            return SolveStatus.ERROR, None, str(e)
        if status is None and literals is None:
            if process.returncode != 0 and not timed_out:
                return SolveStatus.ERROR, None, f"solver exited with {process.returncode}: {errors.strip()[-500:]}"
            return SolveStatus.UNKNOWN, None, "no status line"
        if status == "UNSATISFIABLE":
            return SolveStatus.ERROR, None, "solver reports the hard clauses unsatisfiable"
        if literals is None:
            return SolveStatus.UNKNOWN, None, f"status {status} without a model"
        model = MaxSatModel.from_literals(literals, problem)
        if status == "OPTIMUM FOUND":
            return SolveStatus.OPTIMUM, model, ""
        return SolveStatus.SATISFIABLE, model, "timeout" if timed_out else ""
