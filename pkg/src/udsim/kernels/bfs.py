"""Level-synchronous breadth-first search.

Vertices are partitioned by id over lanes (owner = v mod L, local index
v div L).  Each lane keeps a visited table and two frontier lists in its
scratchpad.  A level runs as one round: every lane spawns an expand thread
per frontier vertex; expand threads stream the neighbor list and send a visit
event for each neighbor w to w's owner, which claims w with cswp, records the
distance in DRAM, appends w to the next frontier and acks with 1 (claimed) or
0.  The number of claims is summed up the reduction tree; the root starts the
next level while it is nonzero.
"""

from __future__ import annotations

from typing import List

from ..fabric import BootEvent, NodeConfig, ResultField
from .common import (
    C_DONE, C_EXPECT, C_K0, C_K1, C_K2, C_NWORK, C_ROUND, C_VDONE, P_ATTR, P_K1, P_K2,
    P_NLANES, P_RESULT, P_TABLE, KernelBundle, attr_fetch, build_program, bump, check_capacity,
    complete_check, reduce_handler, refill, round_prologue, slot_base, tree_params,
)
from .graph import Graph
from .layout import LayoutPlan

SLOT = 64
INF = (1 << 64) - 1
FCOUNT0 = C_K0
FCOUNT1 = C_K1
CLAIMED = C_K2
P_FB0 = P_K1
P_FSTRIDE = P_K2


def _contrib() -> str:
    # the frontier of this level has been consumed
    return f"""\
    movlr X12, ZERO, {C_ROUND}
    andi X12, X12, 1
    slli X12, X12, 3
    movrl ZERO, X12, {FCOUNT0}
    movlr X12, ZERO, {CLAIMED}
"""


def bfs_source() -> str:
    return f"""\
.event bfs_round, bfs_expand, bfs_eattr, bfs_eseg, bfs_visit, bfs_ack, red_add

# OB0 = level
bfs_round:
{round_prologue("Br", "bfs_round", (CLAIMED,))}\
    andi X1, OB0, 1
    slli X2, X1, 3
    movlr X3, X2, {FCOUNT0}
    movrl X3, ZERO, {C_NWORK}
    movlr X4, ZERO, {P_FSTRIDE}
    mul X4, X4, X1
    movlr X5, ZERO, {P_FB0}
    add X4, X4, X5
    evi X5, NWID, NEW, @bfs_expand
    add X6, OB0, ZERO
Br_loop:
    beq X3, ZERO, Br_end
    movlr X7, X4, 0
    sendr X5, X7, X6
    addi X4, X4, 8
    subi X3, X3, 1
    beq ZERO, ZERO, Br_loop
Br_end:
{complete_check("Br", _contrib())}
# OB0 = v, OB1 = level of v
bfs_expand:
    add X9, OB0, ZERO
    addi X2, OB1, 1
    movlr X3, ZERO, {P_NLANES}
    movir X8, 0
{slot_base(SLOT)}\
{attr_fetch("X9", "bfs_eattr")}\
    yield

bfs_eattr:
    add X0, OB2, ZERO
    slli X1, OB0, 3
    add X1, X1, X0
{refill("Be", "X0", "X1", "X4", "X5", "bfs_eseg", "Be_done", 0, sel=None)}\
    yield
Be_done:
{bump(C_EXPECT, "X12", "X8")}\
{bump(C_VDONE)}\
{complete_check("Be", _contrib())}
bfs_eseg:
    bcpyol X10
Bs_loop:
    beq X5, ZERO, Bs_refill
    movlr X12, X4, 0
    addi X4, X4, 8
    subi X5, X5, 1
    mod X13, X12, X3
    evi X13, X13, NEW, @bfs_visit
    sendr X13, X12, X2, NWID
    addi X8, X8, 1
    beq ZERO, ZERO, Bs_loop
Bs_refill:
{refill("Bs", "X0", "X1", "X4", "X5", "bfs_eseg", "Bs_done", 0, sel=None)}\
    yield
Bs_done:
{bump(C_EXPECT, "X12", "X8")}\
{bump(C_VDONE)}\
{complete_check("Bs", _contrib())}
# OB0 = w, OB1 = candidate distance, OB2 = reply lane
bfs_visit:
    movlr X1, ZERO, {P_NLANES}
    div X1, OB0, X1
    slli X1, X1, 3
    movlr X2, ZERO, {P_TABLE}
    add X1, X1, X2
    movir X3, 1
    cswp X4, X1, ZERO, X3
    beq X4, ZERO, Bv_ack
    andi X5, OB1, 1
    slli X6, X5, 3
    movlr X7, X6, {FCOUNT0}
    movlr X8, ZERO, {P_FSTRIDE}
    mul X8, X8, X5
    movlr X9, ZERO, {P_FB0}
    add X8, X8, X9
    slli X9, X7, 3
    add X8, X8, X9
    movrl OB0, X8, 0
    addi X7, X7, 1
    movrl X7, X6, {FCOUNT0}
    slli X1, OB0, 3
    movlr X2, ZERO, {P_RESULT}
    add X1, X1, X2
    sendmr ZERO, X1, OB1
Bv_ack:
    evi X5, OB2, NEW, @bfs_ack
    sendr X5, X4
    yieldt

# OB0 = 1 if the visit claimed its vertex
bfs_ack:
{bump(CLAIMED, "X12", "OB0")}\
{bump(C_DONE)}\
{complete_check("Bk", _contrib())}
{reduce_handler(f'''    movlr X2, ZERO, {C_ROUND}
    addi X2, X2, 1
    beq X1, ZERO, Bf_fin
    evi X3, NWID, NEW, @bfs_round
    sendr X3, X2
    yieldt
Bf_fin:
    yieldt
''')}"""


def build_bfs(g: Graph, source: int, plan: LayoutPlan = None,
              config: NodeConfig = None) -> KernelBundle:
    if not 0 <= source < g.n_vertices:
        raise ValueError(f"invalid source {source}: graph has {g.n_vertices} vertices")
    config = config or NodeConfig(accelerators=1, lanes_per_accelerator=8)
    plan = plan or LayoutPlan.for_graph(g, result_words=g.n_vertices)
    lanes = config.n_lanes
    own_max = -(-g.n_vertices // lanes)
    table = check_capacity(SLOT, config.contexts_per_lane, 3 * own_max)
    init = tree_params(config)
    for words in init.values():
        words.update({P_ATTR: plan.attr_base, P_RESULT: plan.result_base, P_TABLE: table,
                      P_FB0: table + 8 * own_max, P_FSTRIDE: 8 * own_max})
    owner, local = source % lanes, source // lanes
    init[owner].update({table + 8 * local: 1, table + 8 * own_max: source, FCOUNT0: 1})

    attrs = []
    for v in range(g.n_vertices):
        attrs.extend((g.degree(v), v, plan.nbr_base + 8 * g.row_offsets[v], 0))
    dist = [INF] * g.n_vertices
    dist[source] = 0
    dram_init = ((plan.attr_base, tuple(attrs)), (plan.nbr_base, g.neighbors),
                 (plan.result_base, tuple(dist)))
    return KernelBundle(
        name="bfs",
        program=build_program(bfs_source()),
        boot=(BootEvent(0, "bfs_round", (0,)),),
        scratch_init=init,
        dram_init=dram_init,
        result_spec=(ResultField("dist", plan.result_base, g.n_vertices),),
        plan=plan,
        params={"source": source},
        postprocess=_distances,
    )


def _distances(raw) -> List[int]:
    d = raw["dist"]
    if isinstance(d, int):
        d = [d]
    return [-1 if x == INF else x for x in d]
