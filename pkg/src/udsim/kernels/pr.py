"""PageRank by synchronous power iteration.

Each iteration is two rounds.  Scatter (even round): every lane spawns a
vertex thread per owned vertex; the thread reads the vertex's rank and
attributes in parallel, computes rank/degree and sends it to the owner lane of
each neighbor, where it is added to a scratchpad accumulator.  Apply (odd
round): each lane rewrites the ranks of its vertices as base + damping * acc
and clears the accumulators.  Dangling mass is dropped.
"""

from __future__ import annotations

from ..fabric import BootEvent, NodeConfig, ResultField
from ..lane import float_to_bits
from .common import (
    C_DONE, C_EXPECT, C_NWORK, C_ROUND, C_VDONE, P_ATTR, P_K0, P_K1, P_K2, P_N, P_NLANES,
    P_NOWNED, P_RESULT, P_TABLE, KernelBundle, attr_fetch, build_program, bump, check_capacity,
    complete_check, owned_count, reduce_handler, refill, round_prologue, slot_base, tree_params,
)
from .graph import Graph
from .layout import LayoutPlan

SLOT = 64
P_BASE = P_K0
P_DAMP = P_K1
P_ROUNDS = P_K2


def pr_source() -> str:
    return f"""\
.event pr_round, pr_vertex, pr_vin, pr_vseg, pr_accum, pr_ack, red_add

# OB0 = round; even rounds scatter, odd rounds apply
pr_round:
{round_prologue("Pr", "pr_round")}\
    movlr X1, ZERO, {P_NOWNED}
    andi X2, OB0, 1
    beq X2, ZERO, Pr_scatter
    movrl ZERO, ZERO, {C_NWORK}
    movlr X3, ZERO, {P_TABLE}
    add X4, NWID, ZERO
    movlr X5, ZERO, {P_NLANES}
    movlr X6, ZERO, {P_BASE}
    movlr X7, ZERO, {P_DAMP}
    movlr X8, ZERO, {P_RESULT}
Pa_loop:
    beq X1, ZERO, Pr_end
    movlr X9, X3, 0
    fmul X9, X9, X7
    fadd X9, X9, X6
    slli X10, X4, 3
    add X10, X10, X8
    sendmr ZERO, X10, X9
    movrl ZERO, X3, 0
    addi X3, X3, 8
    add X4, X4, X5
    subi X1, X1, 1
    beq ZERO, ZERO, Pa_loop
Pr_scatter:
    movrl X1, ZERO, {C_NWORK}
    add X2, NWID, ZERO
    movlr X3, ZERO, {P_N}
    movlr X4, ZERO, {P_NLANES}
    evi X5, NWID, NEW, @pr_vertex
Ps_loop:
    bgt X3, X2, Ps_spawn
    beq ZERO, ZERO, Pr_end
Ps_spawn:
    sendr X5, X2
    add X2, X2, X4
    beq ZERO, ZERO, Ps_loop
Pr_end:
{complete_check("Pr")}
# OB0 = v; fetch attributes and rank together
pr_vertex:
    add X9, OB0, ZERO
{slot_base(SLOT)}\
{attr_fetch("X9", "pr_vin")}\
    slli X12, X9, 3
    movlr X13, ZERO, {P_RESULT}
    add X12, X12, X13
    ev X13, NWID, TID, @pr_vin
    sendm X13, X12, 1, R, X0
    movir X7, 2
    movir X8, 0
    yield

pr_vin:
    movir X12, 1
    beq EOPS, X12, Pv_rank
    add X0, OB2, ZERO
    slli X1, OB0, 3
    add X1, X1, X0
    add X3, OB0, ZERO
    beq ZERO, ZERO, Pv_got
Pv_rank:
    add X2, OB0, ZERO
Pv_got:
    subi X7, X7, 1
    beq X7, ZERO, Pv_go
    yield
Pv_go:
    beq X3, ZERO, Pv_done
    fcvt X12, X3
    fdiv X2, X2, X12
    movlr X3, ZERO, {P_NLANES}
{refill("Pv", "X0", "X1", "X4", "X5", "pr_vseg", "Pv_done", 0, sel=None)}\
    yield
Pv_done:
{bump(C_EXPECT, "X12", "X8")}\
{bump(C_VDONE)}\
{complete_check("Pv")}
pr_vseg:
    bcpyol X10
Pg_loop:
    beq X5, ZERO, Pg_refill
    movlr X12, X4, 0
    addi X4, X4, 8
    subi X5, X5, 1
    mod X13, X12, X3
    evi X13, X13, NEW, @pr_accum
    sendr X13, X12, X2, NWID
    addi X8, X8, 1
    beq ZERO, ZERO, Pg_loop
Pg_refill:
{refill("Pg", "X0", "X1", "X4", "X5", "pr_vseg", "Pg_done", 0, sel=None)}\
    yield
Pg_done:
{bump(C_EXPECT, "X12", "X8")}\
{bump(C_VDONE)}\
{complete_check("Pg")}
# OB0 = w, OB1 = contribution (double), OB2 = reply lane
pr_accum:
    movlr X1, ZERO, {P_NLANES}
    div X1, OB0, X1
    slli X1, X1, 3
    movlr X2, ZERO, {P_TABLE}
    add X1, X1, X2
    movlr X3, X1, 0
    fadd X3, X3, OB1
    movrl X3, X1, 0
    evi X4, OB2, NEW, @pr_ack
    send X4, X0, 0
    yieldt

pr_ack:
{bump(C_DONE)}\
{complete_check("Pk")}
{reduce_handler(f'''    movlr X2, ZERO, {C_ROUND}
    addi X2, X2, 1
    movlr X3, ZERO, {P_ROUNDS}
    beq X2, X3, Pf_fin
    evi X3, NWID, NEW, @pr_round
    sendr X3, X2
    yieldt
Pf_fin:
    yieldt
''')}"""


def build_pr(g: Graph, damping: float = 0.85, iters: int = 10, plan: LayoutPlan = None,
             config: NodeConfig = None) -> KernelBundle:
    if iters < 1:
        raise ValueError("iters must be >= 1")
    config = config or NodeConfig(accelerators=1, lanes_per_accelerator=8)
    n = g.n_vertices
    plan = plan or LayoutPlan.for_graph(g, result_words=n)
    lanes = config.n_lanes
    own_max = -(-n // lanes)
    table = check_capacity(SLOT, config.contexts_per_lane, own_max)
    init = tree_params(config)
    for lane, words in init.items():
        words.update({P_N: n, P_ATTR: plan.attr_base, P_RESULT: plan.result_base,
                      P_NOWNED: owned_count(n, lane, lanes), P_TABLE: table,
                      P_BASE: float_to_bits((1.0 - damping) / n), P_DAMP: float_to_bits(damping),
                      P_ROUNDS: 2 * iters})
    attrs = []
    for v in range(n):
        attrs.extend((g.degree(v), v, plan.nbr_base + 8 * g.row_offsets[v], 0))
    dram_init = ((plan.attr_base, tuple(attrs)), (plan.nbr_base, g.neighbors),
                 (plan.result_base, (float_to_bits(1.0 / n),) * n))
    return KernelBundle(
        name="pr",
        program=build_program(pr_source()),
        boot=(BootEvent(0, "pr_round", (0,)),),
        scratch_init=init,
        dram_init=dram_init,
        result_spec=(ResultField("rank", plan.result_base, n, dtype="f64"),),
        plan=plan,
        params={"damping": damping, "iters": iters},
        postprocess=lambda raw: list(raw["rank"]) if n > 1 else [raw["rank"]],
    )
