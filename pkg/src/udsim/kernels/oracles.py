"""Host-side reference implementations used to check simulated results."""

from __future__ import annotations

from collections import deque
from typing import List

from .graph import Graph


def oracle_tc(g: Graph) -> int:
    """Triangles via sorted-merge intersection with u < v < w ordering."""
    total = 0
    for v in range(g.n_vertices):
        av = g.adj(v)
        for u in av:
            if u <= v:
                continue
            au = g.adj(u)
            i = j = 0
            while i < len(av) and j < len(au):
                a, b = av[i], au[j]
                if a == b:
                    if a > u:
                        total += 1
                    i += 1
                    j += 1
                elif a < b:
                    i += 1
                else:
                    j += 1
    return total


def oracle_bfs(g: Graph, src: int) -> List[int]:
    """Hop distances from src; -1 for unreachable vertices."""
    if not 0 <= src < g.n_vertices:
        raise ValueError(f"source {src} outside [0, {g.n_vertices})")
    dist = [-1] * g.n_vertices
    dist[src] = 0
    q = deque([src])
    while q:
        v = q.popleft()
        for w in g.adj(v):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def oracle_pr(g: Graph, damping: float = 0.85, iters: int = 10) -> List[float]:
    """Synchronous power iteration; vertices without edges leak their mass."""
    n = g.n_vertices
    base = (1.0 - damping) / n
    rank = [1.0 / n] * n
    deg = g.degrees
    for _ in range(iters):
        acc = [0.0] * n
        for u in range(n):
            if deg[u]:
                c = rank[u] / float(deg[u])
                for w in g.adj(u):
                    acc[w] += c
        rank = [base + damping * a for a in acc]
    return rank


def jaccard(g: Graph, u: int, v: int) -> float:
    if u == v:
        return 1.0 if g.degree(u) else 0.0
    a, b = set(g.adj(u)), set(g.adj(v))
    inter = len(a & b)
    denom = len(a) + len(b) - inter
    return inter / denom if denom else 0.0


def oracle_js(g: Graph) -> List[List[float]]:
    n = g.n_vertices
    out = [[0.0] * n for _ in range(n)]
    for u in range(n):
        out[u][u] = jaccard(g, u, u)
        for v in range(u + 1, n):
            out[u][v] = out[v][u] = jaccard(g, u, v)
    return out
