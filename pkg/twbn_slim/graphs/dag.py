from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

import networkx as nx

from twbn_slim.errors import InputError

# Moral graphs are plain undirected networkx graphs over the vertices 0..n-1.
MoralGraph = nx.Graph


@dataclass(frozen=True)
class Dag:
    """A directed graph given by one parent set per vertex.

    Vertices are the dense ids ``0..n-1``. Self-parents and out-of-range ids are rejected
    on construction; acyclicity is a property checked with :func:`is_acyclic`.
    """

    parents: tuple[frozenset[int], ...]

    def __post_init__(self):
        parents = tuple(frozenset(p) for p in self.parents)
        n = len(parents)
        for v, parent_set in enumerate(parents):
            if v in parent_set:
                raise InputError(f"vertex {v} appears in its own parent set")
            for u in parent_set:
                if not 0 <= u < n:
                    raise InputError(f"parent {u} of vertex {v} is outside 0..{n - 1}")
        object.__setattr__(self, "parents", parents)

    @classmethod
    def empty(cls, vertex_count: int) -> "Dag":
        return cls(tuple(frozenset() for _ in range(vertex_count)))

    @classmethod
    def from_arcs(cls, vertex_count: int, arcs: Iterable[tuple[int, int]]) -> "Dag":
        parents: list[set[int]] = [set() for _ in range(vertex_count)]
        for u, v in arcs:
            parents[v].add(u)
        return cls(tuple(frozenset(p) for p in parents))

    @property
    def vertex_count(self) -> int:
        return len(self.parents)

    def parent_set(self, v: int) -> frozenset[int]:
        return self.parents[v]

    def arcs(self) -> list[tuple[int, int]]:
        return [(u, v) for v, parent_set in enumerate(self.parents) for u in sorted(parent_set)]

    def with_parents(self, updates: Mapping[int, Iterable[int]]) -> "Dag":
        """Return a copy where the vertices in ``updates`` get new parent sets."""
        parents = list(self.parents)
        for v, parent_set in updates.items():
            parents[v] = frozenset(parent_set)
        return Dag(tuple(parents))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.vertex_count))
        graph.add_edges_from(self.arcs())
        return graph


def is_acyclic(d: Dag) -> bool:
    return nx.is_directed_acyclic_graph(d.to_networkx())


def moralize(d: Dag) -> MoralGraph:
    """Undirect every arc and marry every pair of co-parents."""
    moral = nx.Graph()
    moral.add_nodes_from(range(d.vertex_count))
    for v, parent_set in enumerate(d.parents):
        moral.add_edges_from((u, v) for u in parent_set)
        moral.add_edges_from(combinations(sorted(parent_set), 2))
    return moral
