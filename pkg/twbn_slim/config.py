from typing import Literal, Optional

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Defaults of the local-improvement loop: budget 10, 2 s per solver call.
DEFAULT_BUDGET = 10
DEFAULT_SOLVER_TIMEOUT = 2.0
DEFAULT_WEIGHT_SCALE = 1000


class SlimSettings(BaseSettings):
    """Defaults for every command, overridable with TWBN_SLIM_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="TWBN_SLIM_")

    budget: int = Field(DEFAULT_BUDGET, ge=1)
    solver_timeout: float = Field(DEFAULT_SOLVER_TIMEOUT, gt=0)
    solver_command: Optional[str] = None
    weight_scale: int = Field(DEFAULT_WEIGHT_SCALE, ge=1)
    max_parent_size: int = Field(2, ge=0)
    candidate_limit: int = Field(20, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)


class SolverConfig(BaseModel):
    """How a subinstance gets solved.

    ``command`` is a template such as ``"uwrmaxsat -m {wcnf}"``; ``{wcnf}`` is replaced
    by the path of the temporary WCNF file.
    """

    command: Optional[str] = None
    timeout: float = Field(DEFAULT_SOLVER_TIMEOUT, gt=0)
    grace: float = Field(1.0, ge=0)
    mode: Literal["external", "oracle", "rc2"] = "external"
