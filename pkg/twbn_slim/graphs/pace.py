"""PACE 2017 ``.td`` files: ``s td <#bags> <max-bag-size> <#vertices>``, ``b <id> <v...>``, tree edges ``<id> <id>``.

Bag ids and vertices are 1-indexed in files and 0-indexed in memory.
"""
from pathlib import Path
from typing import Union

import networkx as nx

from twbn_slim.errors import InputError
from twbn_slim.graphs.decomposition import TreeDecomposition


def format_td(td: TreeDecomposition, vertex_count: int) -> str:
    compact = td.relabel(first=1)
    lines = [f"s td {len(compact.bags)} {compact.max_bag_size} {vertex_count}"]
    for b in sorted(compact.bags):
        members = " ".join(str(v + 1) for v in sorted(compact.bags[b]))
        lines.append(f"b {b} {members}".rstrip())
    for a, b in sorted(tuple(sorted(e)) for e in compact.tree.edges()):
        lines.append(f"{a} {b}")
    return "\n".join(lines) + "\n"


def write_td(td: TreeDecomposition, vertex_count: int, path: Union[str, Path]) -> None:
    Path(path).write_text(format_td(td, vertex_count))


def parse_td(text: str) -> tuple[TreeDecomposition, int]:
    """Parse ``.td`` text; returns the decomposition and the declared vertex count."""
    header = None
    bags: dict[int, set[int]] = {}
    tree = nx.Graph()
    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "s":
            if header is not None or len(parts) != 5 or parts[1] != "td":
                raise InputError(f"line {line_num}: malformed or repeated 's td' line")
            header = tuple(int(x) for x in parts[2:])
            continue
        if header is None:
            raise InputError(f"line {line_num}: content before the 's td' line")
        if parts and parts[-1] == "0" and parts[0] != "b":
            parts = parts[:-1]
        try:
            if parts[0] == "b":
                members = parts[2:]
                if members and members[-1] == "0":
                    members = members[:-1]
                bag_id = int(parts[1]) - 1
                bags[bag_id] = {int(v) - 1 for v in members}
            elif len(parts) == 2:
                tree.add_edge(int(parts[0]) - 1, int(parts[1]) - 1)
            else:
                raise InputError(f"line {line_num}: expected a tree edge, got {raw!r}")
        except ValueError as e:
            raise InputError(f"line {line_num}: {e}") from e

    if header is None:
        raise InputError("missing 's td' line")
    declared_bags, _, vertex_count = header
    if len(bags) != declared_bags:
        raise InputError(f"header declares {declared_bags} bags, file has {len(bags)}")
    tree.add_nodes_from(bags)
    return TreeDecomposition(tree, bags), vertex_count


def read_td(path: Union[str, Path]) -> tuple[TreeDecomposition, int]:
    return parse_td(Path(path).read_text())
