"""Jaccard similarity of every vertex pair.

Lanes own vertices u (u mod L) and spawn one pair thread per (u, v), v > u,
round-robin over the lanes of their accelerator.  A pair thread reads both
attribute records, caches nl(u) in its scratchpad slot when it spans at most
four 64 B blocks (fetched in parallel and placed by response address), then
streams nl(v) through a one-block buffer and merge-counts common neighbors.
Longer lists fall back to streaming both; those pairs start on js_fstep, so
the fallback count is that label's invocation count.  J(u, v) is written to
an n x n matrix in DRAM; the host mirrors it and fills the diagonal.
"""

from __future__ import annotations

from typing import List

from ..fabric import BootEvent, NodeConfig, ResultField
from .common import (
    C_DONE, C_EXPECT, C_NWORK, C_VDONE, P_ATTR, P_N, P_NLANES, P_RESULT, KernelBundle,
    attr_fetch, build_program, bump, check_capacity, complete_check, merge, reduce_handler,
    refill, round_prologue, rr_init, rr_next, slot_base, tree_params,
)
from .graph import Graph
from .layout import LayoutPlan

SLOT = 384
CACHE_BYTES = 256
BUF_B = 256
ST_REPORT = 320
ST_U = 328
ST_V = 336
ST_DU = 344
ST_DV = 352
ST_FIRST = 360


def _step(p: str) -> str:
    """Merge step on a freshly arrived block (buffer offset in X11)."""
    return f"""\
    add X12, X10, X11
    bcpyol X12
    movir X11, -1
{merge(p, p + "_refa", p + "_refb")}\
{p}_refa:
{refill(p + "a", "X0", "X1", "X4", "X5", "js_step", p + "_fin", 0)}\
    yield
{p}_refb:
{refill(p + "b", "X2", "X3", "X6", "X7", "js_step", p + "_fin", BUF_B)}\
    yield
{_fin(p)}"""


def _fin(p: str) -> str:
    """Compute J from X8 common neighbors, write it, report, end the thread."""
    return f"""\
{p}_fin:
    movlr X12, X10, {ST_DU}
    movlr X13, X10, {ST_DV}
    add X12, X12, X13
    sub X12, X12, X8
    movir X14, 0
    beq X12, ZERO, {p}_write
    fcvt X12, X12
    fcvt X14, X8
    fdiv X14, X14, X12
{p}_write:
    movlr X12, X10, {ST_U}
    movlr X13, ZERO, {P_N}
    mul X12, X12, X13
    movlr X13, X10, {ST_V}
    add X12, X12, X13
    slli X12, X12, 3
    movlr X13, ZERO, {P_RESULT}
    add X12, X12, X13
    sendmr ZERO, X12, X14
    movlr X12, X10, {ST_REPORT}
    send X12, X0, 0
    yieldt
"""


_ROOT = "    yieldt\n"


def js_source() -> str:
    return f"""\
.event js_round, js_pair, js_attr, js_cfill, js_step, js_fstep, js_done, red_add

js_round:
{round_prologue("Jr", "js_round")}\
    movir X1, 1
    movrl X1, ZERO, {C_NWORK}
{rr_init("Jr")}\
    movlr X2, ZERO, {P_N}
    movlr X3, ZERO, {P_NLANES}
    add X4, NWID, ZERO
    movir X8, 0
    evi X11, NWID, NEW, @js_done
Jr_u:
    bgt X2, X4, Jr_v0
    beq ZERO, ZERO, Jr_end
Jr_v0:
    addi X5, X4, 1
Jr_v:
    bgt X2, X5, Jr_spawn
    add X4, X4, X3
    beq ZERO, ZERO, Jr_u
Jr_spawn:
    evi X13, X6, NEW, @js_pair
    sendr X13, X4, X5, X11
    addi X8, X8, 1
{rr_next("Jr")}\
    addi X5, X5, 1
    beq ZERO, ZERO, Jr_v
Jr_end:
{bump(C_EXPECT, "X12", "X8")}\
{bump(C_VDONE)}\
{complete_check("Jr")}
# OB0 = u, OB1 = v, OB2 = report event word
js_pair:
{slot_base(SLOT)}\
    movrl OB2, X10, {ST_REPORT}
    movrl OB0, X10, {ST_U}
    movrl OB1, X10, {ST_V}
    add X9, OB0, ZERO
{attr_fetch("X9", "js_attr")}\
    add X9, OB1, ZERO
{attr_fetch("X9", "js_attr")}\
    movir X7, 2
    movir X8, 0
    yield

js_attr:
    slli X13, OB0, 3
    add X13, X13, OB2
    movlr X12, X10, {ST_U}
    beq OB1, X12, Ja_u
    add X2, OB2, ZERO
    add X3, X13, ZERO
    movrl OB0, X10, {ST_DV}
    beq ZERO, ZERO, Ja_got
Ja_u:
    add X0, OB2, ZERO
    add X1, X13, ZERO
    movrl OB0, X10, {ST_DU}
Ja_got:
    subi X7, X7, 1
    beq X7, ZERO, Ja_go
    yield
Ja_go:
    movir X9, -1
    beq X0, X1, Ja_fin
    beq X2, X3, Ja_fin
    andi X12, X0, -64
    movrl X12, X10, {ST_FIRST}
    sub X13, X1, X12
    movir X14, {CACHE_BYTES}
    bgt X13, X14, Ja_stream
    movir X6, 0
    ev X13, NWID, TID, @js_cfill
Ja_fill:
    sendm X13, X12, 8, R, X0
    addi X6, X6, 1
    addi X12, X12, 64
    bgt X1, X12, Ja_fill
    yield
Ja_stream:
{refill("Js", "X0", "X1", "X4", "X5", "js_fstep", "Ja_fin", 0)}\
    yield
{_fin("Ja")}
# a block of nl(u) for the cache; ECONT holds its address
js_cfill:
    movlr X12, X10, {ST_FIRST}
    sub X12, ECONT, X12
    add X12, X12, X10
    bcpyol X12
    subi X6, X6, 1
    beq X6, ZERO, Jc_go
    yield
Jc_go:
    movlr X12, X10, {ST_FIRST}
    sub X12, X0, X12
    add X4, X10, X12
    movlr X5, X10, {ST_DU}
    add X0, X1, ZERO
    movir X7, 0
{refill("Jc", "X2", "X3", "X6", "X7", "js_step", "Jc_fin", BUF_B)}\
    yield
{_fin("Jc")}
js_step:
{_step("Jm")}
js_fstep:
{_step("Jn")}
js_done:
{bump(C_DONE)}\
{complete_check("Jd")}
{reduce_handler(_ROOT)}"""


def build_js(g: Graph, plan: LayoutPlan = None, config: NodeConfig = None) -> KernelBundle:
    config = config or NodeConfig(accelerators=1, lanes_per_accelerator=8)
    n = g.n_vertices
    plan = plan or LayoutPlan.for_graph(g, result_words=n * n)
    check_capacity(SLOT, config.contexts_per_lane, 0)
    init = tree_params(config)
    for words in init.values():
        words.update({P_N: n, P_ATTR: plan.attr_base, P_RESULT: plan.result_base})
    attrs = []
    for v in range(n):
        attrs.extend((g.degree(v), v, plan.nbr_base + 8 * g.row_offsets[v], 0))
    dram_init = ((plan.attr_base, tuple(attrs)), (plan.nbr_base, g.neighbors),
                 (plan.result_base, (0,) * (n * n)))
    degrees = g.degrees

    def collect(raw) -> List[List[float]]:
        flat = raw["js"]
        if n == 1:
            flat = [flat]
        out = [[0.0] * n for _ in range(n)]
        for u in range(n):
            out[u][u] = 1.0 if degrees[u] else 0.0
            for v in range(u + 1, n):
                out[u][v] = out[v][u] = flat[u * n + v]
        return out

    return KernelBundle(
        name="js",
        program=build_program(js_source()),
        boot=(BootEvent(0, "js_round", (0,)),),
        scratch_init=init,
        dram_init=dram_init,
        result_spec=(ResultField("js", plan.result_base, n * n, dtype="f64"),),
        plan=plan,
        params={},
        postprocess=collect,
    )
