import math
from typing import Iterable

import numpy as np

from twbn_slim.errors import InputError
from twbn_slim.scoring.dataset import Dataset


def _configuration_index(data: Dataset, parents: Iterable[int]) -> np.ndarray:
    """Mixed-radix index of each row's parent configuration."""
    index = np.zeros(data.sample_count, dtype=np.int64)
    for p in sorted(parents):
        index = index * data.arities[p] + data.rows[:, p]
    return index


def log_likelihood(data: Dataset, v: int, parents: frozenset[int]) -> float:
    """Maximum log-likelihood term sum N_jk ln(N_jk / N_j) over observed configurations."""
    config = _configuration_index(data, parents)
    joint = config * data.arities[v] + data.rows[:, v]
    joint_keys, joint_counts = np.unique(joint, return_counts=True)
    config_keys, config_counts = np.unique(config, return_counts=True)
    parent_counts = config_counts[np.searchsorted(config_keys, joint_keys // data.arities[v])]
    return float(np.sum(joint_counts * (np.log(joint_counts) - np.log(parent_counts))))


def bic_score(data: Dataset, v: int, parents: Iterable[int]) -> float:
    """Schwarz criterion of ``v`` given ``parents``, natural log.

    LL - (ln N)/2 * (r_v - 1) * prod(r_p).
    """
    parents = frozenset(parents)
    if v in parents:
        raise InputError(f"vertex {v} cannot be its own parent")
    for p in parents | {v}:
        if not 0 <= p < data.variable_count:
            raise InputError(f"variable index {p} out of range")
    free_parameters = (data.arities[v] - 1) * math.prod(data.arities[p] for p in parents)
    penalty = 0.5 * math.log(data.sample_count) * free_parameters
    return log_likelihood(data, v, parents) - penalty


def mutual_information(data: Dataset, u: int, v: int) -> float:
    """Sample count times the empirical mutual information of two variables, in nats."""
    return log_likelihood(data, v, frozenset({u})) - log_likelihood(data, v, frozenset())


def candidate_parents(data: Dataset, v: int, limit: int) -> list[int]:
    """The ``limit`` variables with the highest mutual information with ``v`` (ties by index)."""
    others = [u for u in range(data.variable_count) if u != v]
    ranked = sorted(others, key=lambda u: (-mutual_information(data, u, v), u))
    return sorted(ranked[:limit])
