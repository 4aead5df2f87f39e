from twbn_slim.scoring.bic import bic_score, candidate_parents, log_likelihood, mutual_information
from twbn_slim.scoring.cache import (
    ParentSetScore,
    ScoreCache,
    build_cache,
    dag_score,
    format_jkl,
    parse_jkl,
    prune,
    read_jkl,
    write_jkl,
)
from twbn_slim.scoring.dataset import Dataset, load_dataset, save_dataset
from twbn_slim.scoring.report import BicCategory, DeltaBicReport, categorize, delta_bic

__all__ = [
    "BicCategory",
    "Dataset",
    "DeltaBicReport",
    "ParentSetScore",
    "ScoreCache",
    "bic_score",
    "build_cache",
    "candidate_parents",
    "categorize",
    "dag_score",
    "delta_bic",
    "format_jkl",
    "load_dataset",
    "log_likelihood",
    "mutual_information",
    "parse_jkl",
    "prune",
    "read_jkl",
    "save_dataset",
    "write_jkl",
]
