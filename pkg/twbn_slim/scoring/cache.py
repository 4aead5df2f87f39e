import logging
import math
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Union

from tqdm import tqdm

from twbn_slim.errors import InputError, MissingParentSetError
from twbn_slim.graphs.dag import Dag
from twbn_slim.scoring.bic import bic_score, candidate_parents
from twbn_slim.scoring.dataset import Dataset

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10 ** 6
DEFAULT_CANDIDATE_LIMIT = 20


class ParentSetScore(NamedTuple):
    parents: frozenset[int]
    score: float


def _order_key(entry: ParentSetScore):
    return -entry.score, len(entry.parents), sorted(entry.parents)


class ScoreCache:
    """Per-variable candidate parent sets with their decomposable scores.

    Entries of each variable are kept by descending score; the empty set is always present.
    """

    def __init__(self, entries: Mapping[int, Iterable[tuple[Iterable[int], float]]]):
        n = len(entries)
        if set(entries) != set(range(n)):
            raise InputError("score cache variables must be 0..n-1")
        self._entries: dict[int, tuple[ParentSetScore, ...]] = {}
        self._lookup: dict[int, dict[frozenset[int], float]] = {}
        for v in range(n):
            table: dict[frozenset[int], float] = {}
            for parents, score in entries[v]:
                parents = frozenset(parents)
                if v in parents:
                    raise InputError(f"vertex {v} appears in its own candidate parent set")
                if any(not 0 <= u < n for u in parents):
                    raise InputError(f"candidate parent set {sorted(parents)} of {v} is out of range")
                table[parents] = float(score)
            if frozenset() not in table:
                raise InputError(f"vertex {v} has no entry for the empty parent set")
            self._lookup[v] = table
            self._entries[v] = tuple(sorted((ParentSetScore(p, s) for p, s in table.items()), key=_order_key))

    @property
    def vertex_count(self) -> int:
        return len(self._entries)

    def entries(self, v: int) -> tuple[ParentSetScore, ...]:
        return self._entries[v]

    def score(self, v: int, parents: Iterable[int]) -> float:
        parents = frozenset(parents)
        try:
            return self._lookup[v][parents]
        except KeyError:
            raise MissingParentSetError(v, parents) from None

    def __contains__(self, item: tuple[int, Iterable[int]]) -> bool:
        v, parents = item
        return frozenset(parents) in self._lookup.get(v, {})

    def empty_score(self, v: int) -> float:
        return self._lookup[v][frozenset()]

    def alpha(self, vertices: Iterable[int]) -> float:
        """Sum of empty-parent-set scores over ``vertices``."""
        return sum(self.empty_score(v) for v in vertices)

    def with_entry(self, v: int, parents: Iterable[int], score: float) -> "ScoreCache":
        """Copy with one extra (or replaced) entry; the copy is not re-pruned."""
        entries = {u: [tuple(e) for e in self._entries[u]] for u in self._entries}
        entries[v].append((frozenset(parents), score))
        return ScoreCache(entries)

    def size(self) -> int:
        return sum(len(e) for e in self._entries.values())

    def __repr__(self) -> str:
        return f"ScoreCache(variables={self.vertex_count}, entries={self.size()})"


def prune(raw: Mapping[int, Iterable[tuple[Iterable[int], float]]]) -> ScoreCache:
    """Drop every parent set that scores no better than one of its proper subsets.

    Ties are pruned. Since the empty set is a subset of everything, non-empty sets
    scoring at most f(v, {}) go as well.
    """
    pruned = {}
    for v, scored in raw.items():
        table = {frozenset(p): float(s) for p, s in scored}
        if frozenset() not in table:
            raise InputError(f"vertex {v} has no entry for the empty parent set")
        kept = []
        for parents, score in table.items():
            dominated = any(
                table.get(frozenset(subset), -math.inf) >= score
                for k in range(len(parents))
                for subset in combinations(sorted(parents), k)
            )
            if not dominated:
                kept.append((parents, score))
        pruned[v] = kept
    return ScoreCache(pruned)


def build_cache(data: Dataset, max_parent_size: int, candidate_limit: int = DEFAULT_CANDIDATE_LIMIT,
                progress: bool = False) -> ScoreCache:
    """Score all parent sets up to ``max_parent_size`` and prune.

    Enumeration is exhaustive while C(n-1, max_parent_size) stays within 10^6; beyond that,
    each variable only considers its ``candidate_limit`` best partners by mutual information.
    """
    if max_parent_size < 0:
        raise InputError("max_parent_size must be non-negative")
    n = data.variable_count
    exhaustive = math.comb(n - 1, max_parent_size) <= EXHAUSTIVE_LIMIT
    if not exhaustive:
        logger.info("restricting candidate parents to the top %d by mutual information", candidate_limit)
    raw = {}
    for v in tqdm(range(n), desc="scoring", disable=not progress):
        others = [u for u in range(n) if u != v] if exhaustive else candidate_parents(data, v, candidate_limit)
        scored = []
        for k in range(min(max_parent_size, len(others)) + 1):
            for parents in combinations(others, k):
                scored.append((frozenset(parents), bic_score(data, v, parents)))
        raw[v] = scored
    cache = prune(raw)
    logger.debug("built %r from %d scored sets", cache, sum(len(s) for s in raw.values()))
    return cache


def dag_score(cache: ScoreCache, d: Dag) -> float:
    """f(D): the sum of each vertex's score for its parent set."""
    return sum(cache.score(v, d.parent_set(v)) for v in range(d.vertex_count))


def format_jkl(cache: ScoreCache) -> str:
    lines = [str(cache.vertex_count)]
    for v in range(cache.vertex_count):
        entries = cache.entries(v)
        lines.append(f"{v} {len(entries)}")
        for parents, score in entries:
            members = " ".join(str(u) for u in sorted(parents))
            lines.append(f"{score!r} {len(parents)} {members}".rstrip())
    return "\n".join(lines) + "\n"


def write_jkl(cache: ScoreCache, path: Union[str, Path]) -> None:
    Path(path).write_text(format_jkl(cache))


def parse_jkl(text: str) -> ScoreCache:
    tokens = [line.split() for line in text.splitlines() if line.strip()]
    if not tokens:
        raise InputError("empty score file")
    try:
        n = int(tokens[0][0])
        entries: dict[int, list[tuple[frozenset[int], float]]] = {}
        i = 1
        while i < len(tokens):
            v, count = int(tokens[i][0]), int(tokens[i][1])
            scored = []
            for line in tokens[i + 1:i + 1 + count]:
                k = int(line[1])
                parents = frozenset(int(u) for u in line[2:2 + k])
                if len(parents) != k:
                    raise InputError(f"variable {v}: parent list does not match its size {k}")
                scored.append((parents, float(line[0])))
            if len(scored) != count:
                raise InputError(f"variable {v}: expected {count} parent sets")
            entries[v] = scored
            i += 1 + count
    except (ValueError, IndexError) as e:
        raise InputError(f"malformed score file: {e}") from e
    if len(entries) != n:
        raise InputError(f"score file declares {n} variables, found {len(entries)}")
    return ScoreCache(entries)


def read_jkl(path: Union[str, Path]) -> ScoreCache:
    return parse_jkl(Path(path).read_text())
