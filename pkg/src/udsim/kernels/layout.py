"""DRAM layout of graph data: attribute records, neighbor arrays, result regions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from ..memory import DramImage
from .graph import Graph

ATTR_WORDS = 4  # degree, id, neighbor pointer, pad (keeps a record inside one 64 B block)
ALIGN = 64


def _align(x: int) -> int:
    return -(-x // ALIGN) * ALIGN


@dataclass(frozen=True)
class LayoutPlan:
    attr_base: int
    nbr_base: int
    result_base: int
    result_words: int
    aux: Tuple[Tuple[str, int, int], ...] = ()  # (name, base, words)
    limit: Optional[int] = None  # highest usable address + 1

    @classmethod
    def for_graph(cls, g: Graph, result_words: int = 1, aux: Dict[str, int] = None,
                  base: int = 0x10000, limit: Optional[int] = None) -> "LayoutPlan":
        attr = _align(base)
        nbr = _align(attr + ATTR_WORDS * 8 * g.n_vertices)
        res = _align(nbr + 8 * max(len(g.neighbors), 1))
        cur = _align(res + 8 * max(result_words, 1))
        regions = []
        for name, words in (aux or {}).items():
            regions.append((name, cur, words))
            cur = _align(cur + 8 * max(words, 1))
        return cls(attr, nbr, res, result_words, tuple(regions), limit)

    def aux_base(self, name: str) -> int:
        for n, b, _ in self.aux:
            if n == name:
                return b
        raise KeyError(name)

    @property
    def end(self) -> int:
        last = self.result_base + 8 * self.result_words
        for _, b, w in self.aux:
            last = max(last, b + 8 * w)
        return last

    def attr_addr(self, v: int) -> int:
        return self.attr_base + ATTR_WORDS * 8 * v

    def check(self, g: Graph, dram_size: int) -> None:
        regions = [("attributes", self.attr_base, ATTR_WORDS * g.n_vertices),
                   ("neighbors", self.nbr_base, len(g.neighbors)),
                   ("result", self.result_base, self.result_words)]
        regions += [(n, b, w) for n, b, w in self.aux]
        spans = []
        for name, b, w in regions:
            if b % ALIGN:
                raise ValueError(f"region {name} is not 64-byte aligned")
            spans.append((b, b + 8 * w, name))
        spans.sort()
        for (b0, e0, n0), (b1, e1, n1) in zip(spans, spans[1:]):
            if b1 < e0:
                raise ValueError(f"region overflow: {n0} overlaps {n1}")
        top = self.limit if self.limit is not None else dram_size
        if spans and spans[-1][1] > top:
            raise ValueError(f"region overflow: layout needs {spans[-1][1]:#x} bytes, limit is {top:#x}")


def layout_graph(g: Graph, plan: LayoutPlan, dram: DramImage) -> None:
    """Write attribute records and CSR neighbor arrays into the image."""
    plan.check(g, dram.size)
    attrs = []
    for v in range(g.n_vertices):
        ptr = plan.nbr_base + 8 * g.row_offsets[v]
        attrs.extend((g.degree(v), v, ptr, 0))
    dram.write_words(plan.attr_base, attrs)
    if g.neighbors:
        dram.write_words(plan.nbr_base, g.neighbors)
