from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from twbn_slim.errors import InputError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complete categorical data: one column per variable, values in ``0..arity-1``."""

    variable_names: tuple[str, ...]
    arities: tuple[int, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64)
        if rows.ndim != 2:
            raise InputError("dataset rows must form a 2-d table")
        n = len(self.variable_names)
        if len(self.arities) != n or rows.shape[1] != n:
            raise InputError(f"expected {n} values per row and {n} arities")
        if rows.shape[0] < 1:
            raise InputError("dataset has no rows")
        if any(r < 1 for r in self.arities):
            raise InputError("arities must be positive")
        arities = np.asarray(self.arities)
        if (rows < 0).any() or (rows >= arities).any():
            bad = int(np.argwhere((rows < 0) | (rows >= arities))[0][1])
            raise InputError(f"value out of range for variable {self.variable_names[bad]!r}")
        rows.setflags(write=False)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        object.__setattr__(self, "arities", tuple(int(r) for r in self.arities))
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], arities: Optional[Sequence[int]] = None,
                  names: Optional[Sequence[str]] = None) -> "Dataset":
        table = np.asarray(rows, dtype=np.int64)
        if table.ndim == 1:
            table = table.reshape(-1, 1)
        if arities is None:
            arities = tuple(int(c.max()) + 1 for c in table.T)
        if names is None:
            names = tuple(f"X{i}" for i in range(table.shape[1]))
        return cls(tuple(names), tuple(arities), table)

    @property
    def variable_count(self) -> int:
        return len(self.variable_names)

    @property
    def sample_count(self) -> int:
        return self.rows.shape[0]


def load_dataset(path: Union[str, Path], header: bool = True) -> Dataset:
    """Read a whitespace-separated data file.

    With ``header`` the first line holds variable names and the second line arities;
    without it (DEBD-style files) names are ``X0..`` and arities are inferred.
    """
    try:
        table = pd.read_csv(path, sep=r"\s+", header=None, dtype=str, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot parse data file {path}: {e}") from e
    try:
        if not header:
            return Dataset.from_rows(table.to_numpy(dtype=np.int64))
        names = tuple(table.iloc[0])
        arities = tuple(int(a) for a in table.iloc[1])
        rows = table.iloc[2:].to_numpy(dtype=np.int64)
    except (ValueError, IndexError) as e:
        raise InputError(f"malformed data file {path}: {e}") from e
    return Dataset(names, arities, rows)


def save_dataset(data: Dataset, path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        f.write(" ".join(data.variable_names) + "\n")
        f.write(" ".join(str(r) for r in data.arities) + "\n")
        np.savetxt(f, data.rows, fmt="%d", delimiter=" ")
