"""Graph kernels, host oracles and graph utilities."""

from __future__ import annotations

from .bfs import build_bfs
from .common import KernelBundle
from .graph import (
    Graph, GraphFormatError, complete_graph, erdos_renyi, from_edges, graph_info, load_graph,
    parse_edge_list, parse_matrix_market, path_graph, power_law, ring_graph, save_edge_list,
    star_graph,
)
from .js import build_js
from .layout import LayoutPlan, layout_graph
from .oracles import jaccard, oracle_bfs, oracle_js, oracle_pr, oracle_tc
from .pr import build_pr
from .tc import build_tc

KERNELS = ("tc", "bfs", "pr", "js")
PR_TOLERANCE = 1e-9


def build_kernel(name: str, g: Graph, config=None, source: int = 0, damping: float = 0.85,
                 iters: int = 10, coarse: bool = False) -> KernelBundle:
    if name == "tc":
        return build_tc(g, config=config, coarse=coarse)
    if name == "bfs":
        return build_bfs(g, source, config=config)
    if name == "pr":
        return build_pr(g, damping, iters, config=config)
    if name == "js":
        return build_js(g, config=config)
    raise ValueError(f"unknown kernel {name!r}; choose from {', '.join(KERNELS)}")


def oracle_for(bundle: KernelBundle, g: Graph):
    p = bundle.params
    if bundle.name.startswith("tc"):
        return oracle_tc(g)
    if bundle.name == "bfs":
        return oracle_bfs(g, p["source"])
    if bundle.name == "pr":
        return oracle_pr(g, p["damping"], p["iters"])
    if bundle.name == "js":
        return oracle_js(g)
    raise ValueError(f"no oracle for {bundle.name}")


def matches_oracle(bundle: KernelBundle, got, expected) -> bool:
    """Exact equality, except PR which allows PR_TOLERANCE per component."""
    if bundle.name == "pr":
        return len(got) == len(expected) and all(abs(a - b) <= PR_TOLERANCE
                                                 for a, b in zip(got, expected))
    return got == expected


__all__ = [
    "Graph", "GraphFormatError", "KERNELS", "KernelBundle", "LayoutPlan", "build_bfs",
    "build_js", "build_kernel", "build_pr", "build_tc", "complete_graph", "erdos_renyi",
    "from_edges", "graph_info", "jaccard", "layout_graph", "load_graph", "matches_oracle",
    "oracle_bfs", "oracle_for", "oracle_js", "oracle_pr", "oracle_tc", "parse_edge_list",
    "parse_matrix_market", "path_graph", "power_law", "ring_graph", "save_edge_list",
    "star_graph",
]
