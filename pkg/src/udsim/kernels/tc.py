"""Triangle counting.

Flow: a round event fans out over the lane tree; every lane spawns one vertex
thread per owned vertex v (v mod lanes == lane).  A vertex thread reads v's
attributes, streams nl(v) in 8-word blocks and, for each neighbor u > v,
starts an intersect thread for (v, u).  Intersect threads merge nl(v) and
nl(u) block by block, counting common w > u, and report the count to v's
lane, which accumulates it into the lane-local triangle count with cswp.

Fine-grained mode places intersect threads round-robin over the lanes of the
accelerator.  Coarse-grained mode keeps all of a vertex's intersections on the
vertex's own lane, so the vertex is the unit of work distribution.
"""

from __future__ import annotations

from ..fabric import BootEvent, NodeConfig, ResultField
from .common import (
    C_DONE, C_EXPECT, C_K0, C_NWORK, C_VDONE, P_ATTR, P_N, P_NLANES, P_NOWNED, P_RESULT,
    P_TABLE,
    KernelBundle, attr_fetch, build_program, bump, check_capacity, complete_check, merge,
    owned_count, reduce_handler, refill, round_prologue, rr_init, rr_next, slot_base, tree_params,
)
from .graph import Graph
from .layout import LayoutPlan

SLOT = 192
BUF_A = 0
BUF_B = 64
ST_REPORT = 128
TC_VAL = C_K0


def _tc_val_add(p: str, reg: str) -> str:
    return f"""\
    movir X12, {TC_VAL}
{p}_cas:
    movlr X13, X12, 0
    add X14, X13, {reg}
    cswp X15, X12, X13, X14
    beq X15, ZERO, {p}_cas
"""


def _contrib() -> str:
    return f"    movlr X12, ZERO, {TC_VAL}\n"


def _vertex_done(p: str, coarse: bool) -> str:
    body = bump(C_EXPECT, "X12", "X8")
    return body + bump(C_VDONE) + complete_check(p, _contrib())


def tc_source(coarse: bool = False) -> str:
    """Assembly text of the triangle-counting program."""
    spawn_lane = "NWID" if coarse else "X6"
    report = "    evi X11, NWID, NEW, @tc_done\n"
    ret_check = ""
    after_spawn = "    addi X8, X8, 1\n" + ("" if coarse else rr_next("Tg")) + "    beq ZERO, ZERO, Tg_loop\n"
    rr_setup = "" if coarse else rr_init("Tv")

    return f"""\
.event tc_round, tc_vertex, tc_vattr, tc_vseg, tc_isect, tc_iattr, tc_istep, tc_done, red_add

# round event: fan out, then spawn a vertex thread per owned vertex
tc_round:
{round_prologue("Tr", "tc_round")}\
    movlr X1, ZERO, {P_NOWNED}
    movrl X1, ZERO, {C_NWORK}
    add X2, NWID, ZERO
    movlr X3, ZERO, {P_N}
    movlr X4, ZERO, {P_NLANES}
    evi X5, NWID, NEW, @tc_vertex
Tr_loop:
    bgt X3, X2, Tr_spawn
    beq ZERO, ZERO, Tr_end
Tr_spawn:
    sendr X5, X2
    add X2, X2, X4
    beq ZERO, ZERO, Tr_loop
Tr_end:
{complete_check("Tr", _contrib())}
# vertex thread: OB0 = v
tc_vertex:
    add X9, OB0, ZERO
{slot_base(SLOT)}\
{attr_fetch("X9", "tc_vattr")}\
    movir X8, 0
    yield

tc_vattr:
    add X0, OB2, ZERO
    slli X1, OB0, 3
    add X1, X1, X0
    add X2, X0, ZERO
    add X3, X1, ZERO
{rr_setup}\
{report}\
{refill("Tv", "X0", "X1", "X4", "X5", "tc_vseg", "Tv_done", BUF_A, sel=None)}\
    yield
Tv_done:
{_vertex_done("Tv", coarse)}
tc_vseg:
{ret_check}\
    bcpyol X10
Tg_loop:
    beq X5, ZERO, Tg_refill
    movlr X12, X4, 0
    addi X4, X4, 8
    subi X5, X5, 1
    ble X12, X9, Tg_loop
    evi X13, {spawn_lane}, NEW, @tc_isect
    sendr X13, X2, X3, X12, X11
{after_spawn}\
Tg_refill:
{refill("Tg", "X0", "X1", "X4", "X5", "tc_vseg", "Tg_done", BUF_A, sel=None)}\
    yield
Tg_done:
{_vertex_done("Tg", coarse)}
# intersect thread: OB0/OB1 = nl(v) bounds, OB2 = u, OB3 = report event word
tc_isect:
{slot_base(SLOT)}\
    movrl OB3, X10, {ST_REPORT}
    add X0, OB0, ZERO
    add X1, OB1, ZERO
    add X9, OB2, ZERO
    movir X2, 0
    movir X3, 0
    movir X5, 0
    movir X7, 0
    movir X8, 0
{attr_fetch("X9", "tc_iattr")}\
{refill("Ti", "X0", "X1", "X4", "X5", "tc_istep", "Ti_done", BUF_A)}\
    yield
Ti_done:
    movlr X12, X10, {ST_REPORT}
    sendr X12, X8
    yieldt

# attributes of u arrive; start on B unless the A block is still in flight
tc_iattr:
    add X2, OB2, ZERO
    slli X3, OB0, 3
    add X3, X3, X2
    movir X12, -1
    beq X11, X12, Ta_go
    yield
Ta_go:
{refill("Ta", "X2", "X3", "X6", "X7", "tc_istep", "Ta_done", BUF_B)}\
    yield
Ta_done:
    movlr X12, X10, {ST_REPORT}
    sendr X12, X8
    yieldt

# a neighbor-list block arrived into buffer X11
tc_istep:
    add X12, X10, X11
    bcpyol X12
    movir X11, -1
{merge("Tm", "Tm_refa", "Tm_refb")}\
Tm_refa:
{refill("Tra", "X0", "X1", "X4", "X5", "tc_istep", "Tm_done", BUF_A)}\
    yield
Tm_refb:
    beq X3, ZERO, Tm_wait
{refill("Trb", "X2", "X3", "X6", "X7", "tc_istep", "Tm_done", BUF_B)}\
    yield
Tm_wait:
    yield
Tm_done:
    movlr X12, X10, {ST_REPORT}
    sendr X12, X8
    yieldt

# OB0 = triangles found by one intersect thread
tc_done:
{_tc_val_add("Td", "OB0")}\
{bump(C_DONE)}\
{complete_check("Td", _contrib())}
{reduce_handler(f'''    movlr X3, ZERO, {P_RESULT}
    sendmr ZERO, X3, X1
    yieldt
''')}"""


def build_tc(g: Graph, plan: LayoutPlan = None, config: NodeConfig = None,
             coarse: bool = False) -> KernelBundle:
    config = config or NodeConfig(accelerators=1, lanes_per_accelerator=8)
    plan = plan or LayoutPlan.for_graph(g, result_words=1)
    program = build_program(tc_source(coarse))
    table = check_capacity(SLOT, config.contexts_per_lane, 0)
    init = tree_params(config)
    for lane, words in init.items():
        words.update({P_N: g.n_vertices, P_ATTR: plan.attr_base, P_RESULT: plan.result_base,
                      P_NOWNED: owned_count(g.n_vertices, lane, config.n_lanes), P_TABLE: table})
    attrs = []
    for v in range(g.n_vertices):
        attrs.extend((g.degree(v), v, plan.nbr_base + 8 * g.row_offsets[v], 0))
    dram_init = ((plan.attr_base, tuple(attrs)), (plan.nbr_base, g.neighbors),
                 (plan.result_base, (0,)))
    return KernelBundle(
        name="tc-coarse" if coarse else "tc",
        program=program,
        boot=(BootEvent(0, "tc_round", (0,)),),
        scratch_init=init,
        dram_init=dram_init,
        result_spec=(ResultField("triangles", plan.result_base),),
        plan=plan,
        params={"coarse": coarse},
        postprocess=lambda raw: raw["triangles"],
    )
