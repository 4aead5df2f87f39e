"""Benchmark sweeps: datasets x treewidth bounds x seeds x time limits, one CSV row per cell.

A bench spec is a TOML file::

    treewidths = [2, 5, 8]
    seeds = 3
    time_limits = [60.0]
    budget = 10
    solver = "uwrmaxsat -m {wcnf}"
    solver_timeout = 2.0

    [[datasets]]
    path = "data/asia.dat"

    [[datasets]]
    name = "synthetic-30"
    n = 30
    max_parents = 3
    arity = 2
    samples = 5000
    seed = 1
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
import tomli
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from tqdm import tqdm

from twbn_slim.config import DEFAULT_BUDGET, DEFAULT_SOLVER_TIMEOUT, DEFAULT_WEIGHT_SCALE, SolverConfig
from twbn_slim.engine import Improvement, run
from twbn_slim.errors import InputError, SlimError
from twbn_slim.graphs import Dag
from twbn_slim.heuristic import greedy_initial
from twbn_slim.scoring import BicCategory, Dataset, ScoreCache, build_cache, categorize, delta_bic, load_dataset
from twbn_slim.solvers import make_backend

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 5000

TABLE_COLUMNS = [
    "dataset",
    "treewidth",
    "seed",
    "time_limit",
    "status",
    "initial_score",
    "final_score",
    "delta_bic",
    "category",
    "improvements",
    "time_to_extreme",
]


class DatasetSpec(BaseModel):
    name: Optional[str] = None
    path: Optional[Path] = None
    header: bool = True
    n: Optional[int] = Field(None, ge=1)
    max_parents: int = Field(2, ge=0)
    arity: int = Field(2, ge=2)
    samples: int = Field(DEFAULT_SAMPLES, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def check_source(self) -> "DatasetSpec":
        if (self.path is None) == (self.n is None):
            raise ValueError("a dataset needs either a path or generator parameters (n)")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.path is not None:
            return self.path.stem
        return f"synthetic-{self.n}-{self.seed}"


class BenchSpec(BaseModel):
    datasets: list[DatasetSpec] = Field(default_factory=list)
    treewidths: list[int] = Field(default_factory=lambda: [2, 5, 8])
    seeds: int = Field(3, ge=1)
    time_limits: list[float] = Field(default_factory=lambda: [60.0])
    budget: int = Field(DEFAULT_BUDGET, ge=1)
    solver: Optional[str] = None
    solver_mode: Optional[Literal["external", "oracle", "rc2"]] = None
    solver_timeout: float = Field(DEFAULT_SOLVER_TIMEOUT, gt=0)
    max_parent_size: int = Field(2, ge=0)
    weight_scale: int = Field(DEFAULT_WEIGHT_SCALE, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator("treewidths")
    @classmethod
    def check_treewidths(cls, value: list[int]) -> list[int]:
        if any(w < 1 for w in value):
            raise ValueError("treewidth bounds must be at least 1")
        return value

    def solver_config(self) -> SolverConfig:
        mode = self.solver_mode or ("external" if self.solver else "rc2")
        return SolverConfig(command=self.solver, timeout=self.solver_timeout, mode=mode)


def load_bench_spec(path: Union[str, Path]) -> BenchSpec:
    try:
        with open(path, "rb") as f:
            raw = tomli.load(f)
    except tomli.TOMLDecodeError as e:
        raise InputError(f"cannot parse bench spec {path}: {e}") from e
    try:
        return BenchSpec.model_validate(raw)
    except ValidationError as e:
        raise InputError(f"invalid bench spec {path}: {e}") from e


def generate_synthetic(n: int, max_parents: int = 2, arity: int = 2, N: int = DEFAULT_SAMPLES,
                       seed: int = 0) -> tuple[Dataset, Dag]:
    """Random network with in-degree at most ``max_parents`` and uniform-Dirichlet tables, forward-sampled."""
    if n < 1:
        raise InputError("a network needs at least one variable")
    rng = np.random.default_rng(seed)
    order = [int(v) for v in rng.permutation(n)]
    parents: list[frozenset[int]] = [frozenset()] * n
    for i, v in enumerate(order):
        k = int(rng.integers(0, min(max_parents, i) + 1))
        parents[v] = frozenset(int(u) for u in rng.choice(order[:i], size=k, replace=False)) if k else frozenset()
    truth = Dag(tuple(parents))

    rows = np.zeros((N, n), dtype=np.int64)
    for v in order:
        members = sorted(parents[v])
        configurations = arity ** len(members)
        cumulative = np.cumsum(rng.dirichlet(np.ones(arity), size=configurations), axis=1)
        config = np.zeros(N, dtype=np.int64)
        for p in members:
            config = config * arity + rows[:, p]
        draws = rng.random(N)
        rows[:, v] = np.minimum((draws[:, None] > cumulative[config]).sum(axis=1), arity - 1)
    data = Dataset(tuple(f"X{i}" for i in range(n)), (arity,) * n, rows)
    return data, truth


def _load(spec: DatasetSpec) -> Dataset:
    if spec.path is not None:
        return load_dataset(spec.path, header=spec.header)
    data, _ = generate_synthetic(spec.n, spec.max_parents, spec.arity, spec.samples, spec.seed)
    return data


def time_to_extreme(initial_score: float, improvements: Sequence[Improvement]) -> float:
    """Wall time of the first improvement that is extremely positive against ``initial_score``, else NaN."""
    for improvement in improvements:
        if categorize(improvement.score - initial_score) is BicCategory.EXTREMELY_POSITIVE:
            return improvement.wall_time
    return math.nan


def _error_row(label: str, W: int, seed: int, time_limit: float, error: Exception) -> dict:
    return {"dataset": label, "treewidth": W, "seed": seed, "time_limit": time_limit, "status": f"error: {error}",
            "initial_score": math.nan, "final_score": math.nan, "delta_bic": math.nan, "category": "",
            "improvements": 0, "time_to_extreme": math.nan}


def _run_cell(label: str, cache: ScoreCache, W: int, seed: int, time_limit: float, spec: BenchSpec) -> dict:
    try:
        initial = greedy_initial(cache, W, seed)
        budget = max(spec.budget, initial.td.max_bag_size)
        state = run(cache, initial, W, budget, spec.solver_timeout, time_limit, seed,
                    backend=make_backend(spec.solver_config()), weight_scale=spec.weight_scale)
    except Exception as e:
        logger.exception("cell %s W=%d seed=%d failed", label, W, seed)
        return _error_row(label, W, seed, time_limit, e)
    report = delta_bic(initial.score, state.score)
    return {"dataset": label, "treewidth": W, "seed": seed, "time_limit": time_limit,
            "status": "ok" if state.verified else "unverified", "initial_score": initial.score,
            "final_score": state.score, "delta_bic": report.delta, "category": report.category.value,
            "improvements": len(state.improvements),
            "time_to_extreme": time_to_extreme(initial.score, state.improvements)}


def run_bench(spec: BenchSpec, progress: bool = False) -> pd.DataFrame:
    """Run every cell of ``spec``; a dataset that cannot be loaded or scored yields error rows for its cells."""
    rows: list[Optional[dict]] = []
    cells = []
    for dataset in spec.datasets:
        try:
            cache, error = build_cache(_load(dataset), spec.max_parent_size), None
        except (SlimError, OSError) as e:
            logger.exception("dataset %s failed to load", dataset.label)
            cache, error = None, e
        for W in spec.treewidths:
            for seed in range(spec.seeds):
                for time_limit in spec.time_limits:
                    if error is not None:
                        rows.append(_error_row(dataset.label, W, seed, time_limit, error))
                    else:
                        cells.append((len(rows), (dataset.label, cache, W, seed, time_limit, spec)))
                        rows.append(None)

    if spec.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [(i, pool.submit(_run_cell, *cell)) for i, cell in cells]
            for i, future in tqdm(futures, desc="cells", disable=not progress):
                rows[i] = future.result()
    else:
        for i, cell in tqdm(cells, desc="cells", disable=not progress):
            rows[i] = _run_cell(*cell)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_table(table: pd.DataFrame, path: Union[str, Path]) -> None:
    table.to_csv(path, index=False, columns=TABLE_COLUMNS, float_format="%.6f", na_rep="nan")


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    table = pd.read_csv(path, keep_default_na=False, na_values=["nan", "NaN"])
    if list(table.columns) != TABLE_COLUMNS:
        raise InputError(f"unexpected columns in {path}: {list(table.columns)}")
    return table
