import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from twbn_slim.encoding import MaxSatModel, MaxSatProblem
from twbn_slim.subinstance import Subinstance

logger = logging.getLogger(__name__)


class SolveStatus(Enum):
    OPTIMUM = "OPTIMUM"
    SATISFIABLE = "SATISFIABLE"
    UNKNOWN = "UNKNOWN"
    ERROR = "ERROR"


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    model: Optional[MaxSatModel] = None
    wall_time: float = 0.0
    message: str = ""

    def __post_init__(self):
        has_model = self.status in (SolveStatus.OPTIMUM, SolveStatus.SATISFIABLE)
        if has_model != (self.model is not None):
            raise ValueError(f"{self.status.value} outcome must {'' if has_model else 'not '}carry a model")


class SolverBackend:
    name = "backend"

    def solve(self, problem: MaxSatProblem, sub: Subinstance, timeout: Optional[float] = None) -> SolveOutcome:
        """
        Solves the MaxSAT instance of a subinstance.

        Args:
            problem: The encoded instance
            sub: The subinstance it was encoded from
            timeout: Wall-clock limit in seconds, if the backend honours one

        Returns:
            SolveOutcome: status and, for OPTIMUM or SATISFIABLE, the best model found
        """
        start = time.monotonic()
        status, model, message = self._solve(problem, sub, timeout)
        outcome = SolveOutcome(status, model, time.monotonic() - start, message)
        logger.debug("%s: %s in %.3fs%s", self.name, status.value, outcome.wall_time,
                     f" (weight {model.weight})" if model is not None else f" {message}".rstrip())
        return outcome

    def _solve(self, problem: MaxSatProblem, sub: Subinstance,
               timeout: Optional[float]) -> tuple[SolveStatus, Optional[MaxSatModel], str]:
        """
        Runs the actual solver.
        To be implemented by subclasses.
        """
        raise NotImplementedError("Subclasses must implement _solve()")
