"""Undirected graph ingestion, normalization and synthetic generators."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple


class GraphFormatError(ValueError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Graph:
    """CSR adjacency of a simple undirected graph; every edge is stored twice."""
    n_vertices: int
    row_offsets: Tuple[int, ...]
    neighbors: Tuple[int, ...]
    dropped_self_loops: int = 0
    dropped_duplicates: int = 0

    @property
    def n_edges(self) -> int:
        return len(self.neighbors) // 2

    @property
    def degrees(self) -> List[int]:
        r = self.row_offsets
        return [r[v + 1] - r[v] for v in range(self.n_vertices)]

    def degree(self, v: int) -> int:
        return self.row_offsets[v + 1] - self.row_offsets[v]

    def adj(self, v: int) -> Tuple[int, ...]:
        return self.neighbors[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u in range(self.n_vertices) for v in self.adj(u) if u < v]


def from_edges(edges: Iterable[Tuple[int, int]], n: Optional[int] = None,
               compact: bool = True) -> Graph:
    """Normalize an edge collection: drop self-loops and duplicates, sort adjacency.

    With ``compact`` the distinct ids seen are renumbered to 0..k-1 in sorted
    order; otherwise ids are kept and ``n`` (or max id + 1) fixes the size.
    """
    raw = list(edges)
    ids = set()
    for u, v in raw:
        if u < 0 or v < 0:
            raise GraphFormatError(f"negative vertex id in edge ({u}, {v})")
        ids.add(u)
        ids.add(v)
    if compact:
        order = sorted(ids)
        remap = {x: i for i, x in enumerate(order)}
        size = len(order) if n is None else max(n, len(order))
    else:
        remap = None
        size = n if n is not None else (max(ids) + 1 if ids else 0)
        if ids and max(ids) >= size:
            raise GraphFormatError(f"vertex id {max(ids)} out of range for n={size}")
    loops = 0
    seen = set()
    for u, v in raw:
        if remap is not None:
            u, v = remap[u], remap[v]
        if u == v:
            loops += 1
            continue
        seen.add((min(u, v), max(u, v)))
    dups = sum(1 for u, v in raw if u != v) - len(seen)
    adj: List[List[int]] = [[] for _ in range(size)]
    for u, v in seen:
        adj[u].append(v)
        adj[v].append(u)
    offsets = [0]
    nbrs: List[int] = []
    for lst in adj:
        lst.sort()
        nbrs.extend(lst)
        offsets.append(len(nbrs))
    return Graph(size, tuple(offsets), tuple(nbrs), loops, dups)


def parse_edge_list(text: str) -> Graph:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise GraphFormatError(f"expected 'u v', got {raw.strip()!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer vertex id in {raw.strip()!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError("negative vertex id", lineno)
        edges.append((u, v))
    if not edges:
        raise GraphFormatError("empty graph")
    return from_edges(edges)


def parse_matrix_market(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise GraphFormatError("missing %%MatrixMarket header", 1)
    header = lines[0].lower().split()
    if len(header) < 5 or header[1] != "matrix" or header[2] != "coordinate":
        raise GraphFormatError("only coordinate matrices are supported", 1)
    size_line = None
    edges = []
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        try:
            nums = [int(p) for p in parts[:3 if size_line is None else 2]]
        except ValueError:
            raise GraphFormatError(f"non-integer entry in {line!r}", lineno) from None
        if size_line is None:
            if len(nums) != 3:
                raise GraphFormatError("size line needs 'rows cols nnz'", lineno)
            size_line = nums
            continue
        if len(nums) != 2:
            raise GraphFormatError(f"expected 'i j', got {line!r}", lineno)
        i, j = nums
        if not (1 <= i <= size_line[0] and 1 <= j <= size_line[1]):
            raise GraphFormatError(f"entry ({i}, {j}) outside the declared size", lineno)
        edges.append((i - 1, j - 1))
    if size_line is None:
        raise GraphFormatError("missing size line")
    n = max(size_line[0], size_line[1])
    if n == 0:
        raise GraphFormatError("empty graph")
    return from_edges(edges, n=n, compact=False)


def load_graph(path: str, fmt: Optional[str] = None) -> Graph:
    """Load an edge list ("EDGELIST") or Matrix Market ("MTX") file."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if fmt is None:
        fmt = "MTX" if path.lower().endswith(".mtx") or text.startswith("%%MatrixMarket") else "EDGELIST"
    fmt = fmt.upper()
    if fmt == "MTX":
        return parse_matrix_market(text)
    if fmt == "EDGELIST":
        return parse_edge_list(text)
    raise GraphFormatError(f"unknown graph format {fmt!r}")


def save_edge_list(g: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# n={g.n_vertices} m={g.n_edges}\n")
        for u, v in g.edges():
            f.write(f"{u} {v}\n")


# ---------------------------------------------------------------- fixtures

def complete_graph(n: int) -> Graph:
    return from_edges([(u, v) for u in range(n) for v in range(u + 1, n)], n=n, compact=False)


def path_graph(n: int) -> Graph:
    return from_edges([(i, i + 1) for i in range(n - 1)], n=n, compact=False)


def ring_graph(n: int) -> Graph:
    return from_edges([(i, (i + 1) % n) for i in range(n)], n=n, compact=False)


def star_graph(leaves: int) -> Graph:
    return from_edges([(0, i) for i in range(1, leaves + 1)], n=leaves + 1, compact=False)


def erdos_renyi(n: int, m: int, seed: int = 0) -> Graph:
    import networkx as nx
    g = nx.gnm_random_graph(n, m, seed=seed)
    return from_edges(g.edges(), n=n, compact=False)


def power_law(n: int, attach: int, seed: int = 0, shuffle: bool = True) -> Graph:
    """Preferential-attachment graph (heavy-tailed degrees).

    The generator gives hubs the lowest ids; ``shuffle`` relabels vertices with
    a seeded permutation so hub placement is not tied to id order.
    """
    import random
    import networkx as nx
    g = nx.barabasi_albert_graph(n, attach, seed=seed)
    perm = list(range(n))
    if shuffle:
        random.Random(seed).shuffle(perm)
    return from_edges(((perm[u], perm[v]) for u, v in g.edges()), n=n, compact=False)


def graph_info(g: Graph) -> dict:
    deg = g.degrees
    return {
        "vertices": g.n_vertices,
        "edges": g.n_edges,
        "max_degree": max(deg) if deg else 0,
        "avg_degree": (2 * g.n_edges / g.n_vertices) if g.n_vertices else 0.0,
        "isolated": sum(1 for d in deg if d == 0),
        "dropped_self_loops": g.dropped_self_loops,
        "dropped_duplicates": g.dropped_duplicates,
    }
