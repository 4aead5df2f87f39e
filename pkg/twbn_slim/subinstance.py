import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional, Union

import networkx as nx
import numpy as np

from twbn_slim.config import DEFAULT_WEIGHT_SCALE
from twbn_slim.errors import SubinstanceError
from twbn_slim.graphs import Dag, TreeDecomposition
from twbn_slim.scoring import ScoreCache

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]


@dataclass(frozen=True)
class MenuEntry:
    """One admissible parent set of a subinstance vertex.

    ``offset`` is f_P(v) - f_empty(v) and ``weight`` its scaled, rounded value. ``forced_arcs``
    are the virtual arcs (u, v) that choosing this set imposes on the local ordering.
    """

    parents: frozenset[int]
    score: float
    offset: float
    weight: int
    forced_arcs: frozenset[tuple[int, int]] = frozenset()


@dataclass(frozen=True)
class Subinstance:
    selected_bags: frozenset[int]
    vertices: tuple[int, ...]
    boundary: frozenset[int]
    internal: frozenset[int]
    virtual_edges: frozenset[tuple[int, int]]
    menus: Mapping[int, tuple[MenuEntry, ...]]
    incumbent: Mapping[int, frozenset[int]]
    alpha: float
    current_weight: int
    weight_scale: int = DEFAULT_WEIGHT_SCALE
    outside_bags: tuple[frozenset[int], ...] = ()
    vertex_set: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertex_set", frozenset(self.vertices))

    def menu_entry(self, v: int, parents: Iterable[int]) -> MenuEntry:
        parents = frozenset(parents)
        for entry in self.menus[v]:
            if entry.parents == parents:
                return entry
        raise KeyError((v, parents))

    def local_digraph(self, choice: Mapping[int, frozenset[int]]) -> nx.DiGraph:
        """E_S of the chosen parent sets plus the virtual arcs those choices force."""
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        for v in self.vertices:
            entry = self.menu_entry(v, choice[v])
            graph.add_edges_from((u, v) for u in entry.parents & self.vertex_set)
            graph.add_edges_from(entry.forced_arcs)
        return graph

    def extended_moral_graph(self, choice: Mapping[int, frozenset[int]]) -> nx.Graph:
        """Moral graph of the local DAG (parents inside V_S only) plus the virtual edges."""
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        for v in self.vertices:
            inside = sorted(choice[v] & self.vertex_set)
            graph.add_edges_from((u, v) for u in inside)
            graph.add_edges_from(combinations(inside, 2))
        graph.add_edges_from(self.virtual_edges)
        return graph

    def describe(self) -> str:
        lines = [
            f"bags: {sorted(self.selected_bags)}",
            f"vertices: {list(self.vertices)}",
            f"boundary: {sorted(self.boundary)}",
            f"virtual edges: {sorted(self.virtual_edges)}",
            f"alpha: {self.alpha!r}",
            f"current weight: {self.current_weight}",
        ]
        for v in self.vertices:
            lines.append(f"menu {v}: {len(self.menus[v])} entries, incumbent {sorted(self.incumbent[v])}")
            for entry in self.menus[v]:
                forced = f" forced {sorted(entry.forced_arcs)}" if entry.forced_arcs else ""
                lines.append(f"  {sorted(entry.parents)} offset {entry.offset:.6f} weight {entry.weight}{forced}")
        return "\n".join(lines) + "\n"


def select_subtree(td: TreeDecomposition, budget: int, seed: Seed) -> frozenset[int]:
    """Grow a connected set of bags breadth-first from a random root while the covered vertices fit the budget.

    Within a BFS level candidate bags are tried in ascending id order; a bag that does not fit is
    never retried, since the covered set only grows.
    """
    rng = np.random.default_rng(seed)
    roots = sorted(b for b, bag in td.bags.items() if len(bag) <= budget)
    if not roots:
        raise SubinstanceError(f"budget below max bag size ({budget} < {td.max_bag_size})")
    root = roots[int(rng.integers(len(roots)))]

    selected = {root}
    covered = set(td.bags[root])
    visited = {root}
    level = [root]
    while level:
        candidates = sorted({nb for b in level for nb in td.tree.neighbors(b)} - visited)
        visited.update(candidates)
        level = []
        for b in candidates:
            if len(covered | td.bags[b]) <= budget:
                selected.add(b)
                covered |= td.bags[b]
                level.append(b)
    return frozenset(selected)


def classify_vertices(td: TreeDecomposition, selected: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
    selected = frozenset(selected)
    inside = frozenset().union(*(td.bags[b] for b in selected))
    outside = frozenset().union(*(bag for b, bag in td.bags.items() if b not in selected))
    boundary = inside & outside
    return boundary, inside - boundary


def virtual_edges(td: TreeDecomposition, selected: Iterable[int], boundary: Iterable[int]) -> frozenset[tuple[int, int]]:
    """Pairs of boundary vertices that occur together in some unselected bag."""
    selected = frozenset(selected)
    boundary = frozenset(boundary)
    pairs = set()
    for b, bag in td.bags.items():
        if b not in selected:
            pairs.update(combinations(sorted(bag & boundary), 2))
    for u, v in pairs:
        if not any(u in td.bags[b] and v in td.bags[b] for b in selected):
            raise SubinstanceError(f"virtual edge {{{u}, {v}}} shares no selected bag")
    return frozenset(pairs)


def compute_virtual_arcs(d: Dag, vertices: Iterable[int], v: int, parents: Iterable[int],
                         reach: Optional[dict[int, frozenset[int]]] = None) -> Optional[frozenset[tuple[int, int]]]:
    """Virtual arcs (u, v) implied by giving ``v`` the parent set ``parents``.

    u in V_S is forced before v when D has a directed path from u to an external member of
    ``parents`` whose inner vertices are all external. Parent sets of external vertices never
    change, so the search runs backwards over their fixed arcs. Returns None when the path
    would start at v itself.
    """
    vertices = frozenset(vertices)
    if reach is None:
        reach = {}
    sources: set[int] = set()
    for x in frozenset(parents) - vertices:
        if x not in reach:
            reach[x] = _local_ancestors_through_externals(d, vertices, x)
        sources |= reach[x]
    if v in sources:
        return None
    return frozenset((u, v) for u in sources)


def _local_ancestors_through_externals(d: Dag, vertices: frozenset[int], x: int) -> frozenset[int]:
    found = set()
    seen = {x}
    queue = deque([x])
    while queue:
        y = queue.popleft()
        for u in d.parent_set(y):
            if u in vertices:
                found.add(u)
            elif u not in seen:
                seen.add(u)
                queue.append(u)
    return frozenset(found)


def filter_menu(cache: ScoreCache, td: TreeDecomposition, selected: Iterable[int], d: Dag, v: int,
                weight_scale: int = DEFAULT_WEIGHT_SCALE,
                reach: Optional[dict[int, frozenset[int]]] = None) -> list[MenuEntry]:
    """Cached parent sets of ``v`` a local solution may pick.

    A set inside V_S is always kept. A set with external members is kept only when some
    unselected bag holds it together with ``v`` and its virtual arcs are loop-free. Entries
    scoring below the empty set are dropped unless they are the current choice.
    """
    selected = frozenset(selected)
    vertices = frozenset().union(*(td.bags[b] for b in selected))
    outside_bags = [bag for b, bag in td.bags.items() if b not in selected]
    empty = cache.empty_score(v)
    current = d.parent_set(v)
    menu = []
    for parents, score in cache.entries(v):
        offset = score - empty
        if offset < 0 and parents != current:
            continue
        if not parents <= vertices:
            family = parents | {v}
            if not any(family <= bag for bag in outside_bags):
                continue
        forced = compute_virtual_arcs(d, vertices, v, parents, reach)
        if forced is None:
            continue
        menu.append(MenuEntry(parents, score, offset, round(weight_scale * offset), forced))
    return menu


def build_subinstance(cache: ScoreCache, d: Dag, td: TreeDecomposition, budget: int, rng: Seed,
                      weight_scale: int = DEFAULT_WEIGHT_SCALE) -> Subinstance:
    return assemble_subinstance(cache, d, td, select_subtree(td, budget, rng), weight_scale)


def assemble_subinstance(cache: ScoreCache, d: Dag, td: TreeDecomposition, selected: Iterable[int],
                         weight_scale: int = DEFAULT_WEIGHT_SCALE) -> Subinstance:
    """The local problem induced by a given connected set of selected bags."""
    selected = frozenset(selected)
    boundary, internal = classify_vertices(td, selected)
    edges = virtual_edges(td, selected, boundary)
    vertices = tuple(sorted(boundary | internal))

    reach: dict[int, frozenset[int]] = {}
    menus = {}
    incumbent = {}
    for v in vertices:
        menu = filter_menu(cache, td, selected, d, v, weight_scale, reach)
        current = d.parent_set(v)
        if not any(entry.parents == current for entry in menu):
            raise SubinstanceError(f"current parent set {sorted(current)} of vertex {v} is not admissible")
        menus[v] = tuple(menu)
        incumbent[v] = current

    # Negative weights only occur on the current choice; they are encoded on the negated literal.
    current_weight = sum(max(0, next(e.weight for e in menus[v] if e.parents == incumbent[v])) for v in vertices)
    sub = Subinstance(
        selected_bags=selected,
        vertices=vertices,
        boundary=boundary,
        internal=internal,
        virtual_edges=edges,
        menus=menus,
        incumbent=incumbent,
        alpha=cache.alpha(vertices),
        current_weight=current_weight,
        weight_scale=weight_scale,
        outside_bags=tuple(bag for b, bag in sorted(td.bags.items()) if b not in selected),
    )
    logger.debug("subinstance over %d bags: %d vertices, %d boundary, %d virtual edges, K_0 %d",
                 len(selected), len(vertices), len(boundary), len(edges), current_weight)
    return sub
