from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional

import networkx as nx
import numpy as np

from twbn_slim.errors import InputError

EXACT_TREEWIDTH_LIMIT = 16


@dataclass(frozen=True)
class EliminationOrdering:
    """A permutation of vertices; earlier vertices are eliminated first."""

    order: tuple[int, ...]
    position: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        order = tuple(self.order)
        position = {v: i for i, v in enumerate(order)}
        if len(position) != len(order):
            raise InputError("elimination ordering repeats a vertex")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "position", position)

    def __len__(self) -> int:
        return len(self.order)

    def check_covers(self, vertices: Iterable[int]) -> None:
        if set(vertices) != set(self.order):
            raise InputError("elimination ordering is not a permutation of the graph's vertices")


@dataclass(frozen=True)
class TdViolation:
    kind: str  # "T1", "T2" or "tree"
    item: tuple
    message: str


class TreeDecomposition:
    """A tree over integer bag ids together with a bag (vertex set) per id.

    Instances are treated as immutable: the tree is frozen and bags are frozensets.
    """

    def __init__(self, tree: nx.Graph, bags: Mapping[int, Iterable[int]]):
        self.bags: dict[int, frozenset[int]] = {b: frozenset(vs) for b, vs in bags.items()}
        frozen_tree = nx.Graph()
        frozen_tree.add_nodes_from(self.bags)
        for a, b in tree.edges():
            if a not in self.bags or b not in self.bags:
                raise InputError(f"tree edge ({a}, {b}) refers to an unknown bag")
            frozen_tree.add_edge(a, b)
        for node in tree.nodes():
            if node not in self.bags:
                raise InputError(f"tree node {node} has no bag")
        self.tree = nx.freeze(frozen_tree)

    @classmethod
    def single_bag(cls, vertices: Iterable[int]) -> "TreeDecomposition":
        tree = nx.Graph()
        tree.add_node(0)
        return cls(tree, {0: vertices})

    @property
    def width(self) -> int:
        return self.max_bag_size - 1

    @property
    def max_bag_size(self) -> int:
        return max((len(bag) for bag in self.bags.values()), default=0)

    def vertices(self) -> frozenset[int]:
        return frozenset().union(*self.bags.values())

    def bags_containing(self, v: int) -> list[int]:
        return [b for b, bag in self.bags.items() if v in bag]

    def compress(self) -> "TreeDecomposition":
        """Contract every bag that is a subset of a neighbouring bag."""
        tree = nx.Graph(self.tree)
        bags = dict(self.bags)
        changed = True
        while changed:
            changed = False
            for a, b in list(tree.edges()):
                if a not in bags or b not in bags:
                    continue
                if bags[a] <= bags[b]:
                    keep, drop = b, a
                elif bags[b] <= bags[a]:
                    keep, drop = a, b
                else:
                    continue
                for neighbour in list(tree.neighbors(drop)):
                    if neighbour != keep:
                        tree.add_edge(keep, neighbour)
                tree.remove_node(drop)
                del bags[drop]
                changed = True
        return TreeDecomposition(tree, bags)

    def relabel(self, first: int = 0) -> "TreeDecomposition":
        """Renumber bags consecutively from ``first`` in ascending id order."""
        mapping = {b: i for i, b in enumerate(sorted(self.bags), start=first)}
        tree = nx.relabel_nodes(nx.Graph(self.tree), mapping)
        return TreeDecomposition(tree, {mapping[b]: bag for b, bag in self.bags.items()})

    def __repr__(self) -> str:
        return f"TreeDecomposition(bags={len(self.bags)}, width={self.width})"


def validate_td(td: TreeDecomposition, g: nx.Graph) -> tuple[bool, list[TdViolation]]:
    """Check T1 (edge coverage) and T2 (connected occurrence) of ``td`` for ``g``.

    Returns every violation found, not only the first one.
    """
    unknown = td.vertices() - set(g.nodes())
    if unknown:
        raise InputError(f"tree decomposition mentions vertices {sorted(unknown)} not in the graph")

    violations: list[TdViolation] = []
    if td.tree.number_of_nodes() == 0 or not nx.is_tree(td.tree):
        violations.append(TdViolation("tree", (), "bag graph is not a tree"))

    for u, v in g.edges():
        if not any(u in bag and v in bag for bag in td.bags.values()):
            violations.append(TdViolation("T1", (min(u, v), max(u, v)), f"edge {{{u}, {v}}} is in no bag"))

    for v in sorted(g.nodes()):
        holders = td.bags_containing(v)
        if not holders:
            violations.append(TdViolation("T2", (v,), f"vertex {v} is in no bag"))
        elif not nx.is_connected(td.tree.subgraph(holders)):
            violations.append(TdViolation("T2", (v,), f"bags containing vertex {v} are not connected"))

    return not violations, violations


def higher_neighbours(order: EliminationOrdering, g: nx.Graph) -> dict[int, frozenset[int]]:
    """Play the elimination game and return, for each vertex, its later neighbours in the fill-in closure."""
    order.check_covers(g.nodes())
    remaining = nx.Graph(g)
    higher = {}
    for v in order.order:
        neighbours = set(remaining.neighbors(v))
        higher[v] = frozenset(neighbours)
        remaining.add_edges_from(combinations(neighbours, 2))
        remaining.remove_node(v)
    return higher


def fill_in_graph(order: EliminationOrdering, g: nx.Graph) -> nx.Graph:
    closure = nx.Graph()
    closure.add_nodes_from(g.nodes())
    for v, later in higher_neighbours(order, g).items():
        closure.add_edges_from((v, w) for w in later)
    return closure


def width_of_elimination(order: EliminationOrdering, g: nx.Graph) -> int:
    return max((len(later) for later in higher_neighbours(order, g).values()), default=0)


def td_from_elimination(order: EliminationOrdering, g: nx.Graph, compress: bool = True) -> TreeDecomposition:
    """Build the tree decomposition induced by an elimination ordering.

    The bag of v is v plus its later fill-in neighbours; it hangs below the bag of the
    earliest-eliminated of those neighbours. Component roots hang below the bag of the
    last vertex, so the result is a single tree.
    """
    higher = higher_neighbours(order, g)
    if not order.order:
        return TreeDecomposition.single_bag(())
    position = order.position
    tree = nx.Graph()
    bags = {}
    for v in order.order:
        bags[position[v]] = {v} | higher[v]
        tree.add_node(position[v])
    last = order.order[-1]
    for v in order.order:
        if higher[v]:
            parent = min(higher[v], key=position.__getitem__)
            tree.add_edge(position[v], position[parent])
        elif v != last:
            tree.add_edge(position[v], position[last])
    td = TreeDecomposition(tree, bags)
    return td.compress() if compress else td


def min_fill_ordering(g: nx.Graph, rng: Optional[np.random.Generator] = None) -> EliminationOrdering:
    """Greedy min-fill ordering; ties go to the smallest id, or to a random one if ``rng`` is given."""
    remaining = nx.Graph(g)
    order = []
    while remaining.number_of_nodes():
        best_fill = None
        candidates: list[int] = []
        for v in sorted(remaining.nodes()):
            neighbours = list(remaining.neighbors(v))
            fill = sum(1 for a, b in combinations(neighbours, 2) if not remaining.has_edge(a, b))
            if best_fill is None or fill < best_fill:
                best_fill, candidates = fill, [v]
            elif fill == best_fill:
                candidates.append(v)
        v = candidates[int(rng.integers(len(candidates)))] if rng is not None else candidates[0]
        neighbours = list(remaining.neighbors(v))
        remaining.add_edges_from(combinations(neighbours, 2))
        remaining.remove_node(v)
        order.append(v)
    return EliminationOrdering(tuple(order))


def exact_treewidth(g: nx.Graph) -> tuple[int, EliminationOrdering]:
    """Exact treewidth and an optimal elimination ordering by dynamic programming over vertex subsets.

    For a set S eliminated first, tw(S) = min over v in S of max(tw(S - v), |Q(S - v, v)|), where
    Q(S, v) are the vertices outside S + v reachable from v through S.
    """
    vertices = sorted(g.nodes())
    n = len(vertices)
    if n > EXACT_TREEWIDTH_LIMIT:
        raise InputError(f"exact treewidth is limited to {EXACT_TREEWIDTH_LIMIT} vertices, got {n}")
    index = {v: i for i, v in enumerate(vertices)}
    adjacency = [0] * n
    for u, v in g.edges():
        adjacency[index[u]] |= 1 << index[v]
        adjacency[index[v]] |= 1 << index[u]

    def q_size(eliminated: int, i: int) -> int:
        seen = 1 << i
        frontier = [i]
        outside = 0
        while frontier:
            j = frontier.pop()
            reach = adjacency[j] & ~seen
            seen |= reach
            outside |= reach & ~eliminated
            inside = reach & eliminated
            while inside:
                low = inside & -inside
                frontier.append(low.bit_length() - 1)
                inside ^= low
        return bin(outside).count("1")

    full = (1 << n) - 1
    best = [0] * (full + 1)
    choice = [-1] * (full + 1)
    for subset in sorted(range(1, full + 1), key=lambda s: bin(s).count("1")):
        best_value = None
        rest = subset
        while rest:
            low = rest & -rest
            i = low.bit_length() - 1
            rest ^= low
            value = max(best[subset ^ low], q_size(subset ^ low, i))
            if best_value is None or value < best_value:
                best_value, choice[subset] = value, i
        best[subset] = best_value

    reversed_order = []
    subset = full
    while subset:
        i = choice[subset]
        reversed_order.append(vertices[i])
        subset ^= 1 << i
    return best[full], EliminationOrdering(tuple(reversed(reversed_order)))
