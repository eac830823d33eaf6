"""Pieces shared by the kernel programs.

Scratchpad map of every lane (byte offsets):

    0..127      host-written parameters (P_*)
    192..319    round counters and reduction state (C_*)
    1024..      per-thread slots, TID * slot size
    after slots per-lane tables (visited flags, frontiers, accumulators)

Completion protocol: work items report "done" to their owner lane; when a lane
has finished its producers and seen every done/ack it adds its contribution to
a heap-ordered binary reduction tree over global lane ids.  The root (lane 0)
runs the kernel's root code with the total in X1.  Rounds start with a
broadcast down the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from ..asm import assemble
from ..fabric import BootEvent, NodeConfig, ResultField
from ..isa import ProgramImage
from ..memory import DramImage
from .layout import LayoutPlan

# host parameters
P_NLANES = 0
P_LPA = 8
P_ACCBASE = 16
P_N = 24
P_ATTR = 32
P_RESULT = 40
P_PARENT = 48
P_NCHILD = 56
P_CHILD0 = 64
P_CHILD1 = 72
P_NOWNED = 80
P_SLOTBASE = 88
P_TABLE = 96
P_K0 = 104
P_K1 = 112
P_K2 = 120
P_K3 = 128

# counters
C_ROUND = 192
C_DONE = 200
C_EXPECT = 208
C_VDONE = 216
C_NWORK = 224
C_REPORTED = 232
RED_ACC = 240
RED_PEND = 248
C_K0 = 256
C_K1 = 264
C_K2 = 272
C_K3 = 280

SLOT_BASE = 1024
SCRATCH_BYTES = 65536


@dataclass(frozen=True)
class KernelBundle:
    name: str
    program: ProgramImage
    boot: tuple
    scratch_init: Dict[int, Dict[int, int]]
    dram_init: tuple  # ((addr, words), ...)
    result_spec: tuple
    plan: LayoutPlan
    params: Dict[str, object] = field(default_factory=dict)
    postprocess: Optional[Callable] = None

    def prepare(self, dram: DramImage) -> None:
        for addr, words in self.dram_init:
            dram.write_words(addr, words)

    def collect(self, dram: DramImage, lanes=()):
        from ..fabric import host_collect
        raw = host_collect(self.result_spec, dram, lanes)
        return self.postprocess(raw) if self.postprocess else raw


def tree_params(config: NodeConfig) -> Dict[int, Dict[int, int]]:
    """Per-lane parameter block common to all kernels."""
    n = config.n_lanes
    lpa = config.lanes_per_accelerator
    out = {}
    for lane in range(n):
        kids = [k for k in (2 * lane + 1, 2 * lane + 2) if k < n]
        words = {
            P_NLANES: n,
            P_LPA: lpa,
            P_ACCBASE: (lane // lpa) * lpa,
            P_PARENT: (lane - 1) // 2 if lane else 0,
            P_NCHILD: len(kids),
            P_CHILD0: kids[0] if kids else 0,
            P_CHILD1: kids[1] if len(kids) > 1 else 0,
            P_SLOTBASE: SLOT_BASE,
            RED_PEND: len(kids) + 1,
        }
        out[lane] = words
    return out


def owned_count(n: int, lane: int, n_lanes: int) -> int:
    return len(range(lane, n, n_lanes))


# ------------------------------------------------------------------ snippets
# Register conventions in thread code: X10 = slot base, X12..X15 scratch.

def slot_base(slot_bytes: int) -> str:
    return f"""\
    movlr X10, ZERO, {P_SLOTBASE}
    muli X12, TID, {slot_bytes}
    add X10, X10, X12
"""


def attr_fetch(vreg: str, cont_label: str) -> str:
    """Issue a read of vertex attributes (deg, id, ptr, pad) of the vertex in vreg."""
    return f"""\
    slli X12, {vreg}, 5
    movlr X13, ZERO, {P_ATTR}
    add X12, X12, X13
    ev X13, NWID, TID, @{cont_label}
    sendm X13, X12, 4, R, X0
"""


def refill(p: str, ptr: str, end: str, cur: str, rem: str, cont_label: str, done: str,
           buf_off: int, sel: Optional[str] = "X11") -> str:
    """Fetch the 64 B block holding *ptr into the slot buffer at X10+buf_off.

    Sets cur/rem to the part of the block inside [ptr, end) and advances ptr.
    Jumps to ``done`` if the list is exhausted.  The caller yields afterwards.
    """
    sel_line = f"    movir {sel}, {buf_off}\n" if sel else ""
    return f"""\
    beq {ptr}, {end}, {done}
    andi X12, {ptr}, -64
    ev X13, NWID, TID, @{cont_label}
    sendm X13, X12, 8, R, X0
    sub X13, {ptr}, X12
    add {cur}, X10, X13
    addi {cur}, {cur}, {buf_off}
    addi X12, X12, 64
    ble X12, {end}, {p}_lim
    add X12, {end}, ZERO
{p}_lim:
    sub X13, X12, {ptr}
    srli {rem}, X13, 3
    add {ptr}, X12, ZERO
{sel_line}"""


def merge(p: str, refa: str, refb: str) -> str:
    """Merge-intersect A (X4 cur, X5 rem) with B (X6 cur, X7 rem), counting w > X9 in X8."""
    return f"""\
{p}_merge:
    beq X5, ZERO, {refa}
    beq X7, ZERO, {refb}
    movlr X12, X4, 0
    movlr X13, X6, 0
    beq X12, X13, {p}_eq
    bgt X13, X12, {p}_skipa
    cstr X14, X6, X6, X7, X12
    slli X15, X14, 3
    add X6, X6, X15
    sub X7, X7, X14
    beq ZERO, ZERO, {p}_merge
{p}_skipa:
    cstr X14, X4, X4, X5, X13
    slli X15, X14, 3
    add X4, X4, X15
    sub X5, X5, X14
    beq ZERO, ZERO, {p}_merge
{p}_eq:
    ble X12, X9, {p}_nc
    addi X8, X8, 1
{p}_nc:
    addi X4, X4, 8
    subi X5, X5, 1
    addi X6, X6, 8
    subi X7, X7, 1
    beq ZERO, ZERO, {p}_merge
"""


def bump(addr: int, reg: str = "X12", by: str = "1") -> str:
    """Add to a scratchpad counter (register or immediate increment)."""
    if by.isdigit():
        op = f"    addi {reg}, {reg}, {by}\n"
    else:
        op = f"    add {reg}, {reg}, {by}\n"
    return f"    movlr {reg}, ZERO, {addr}\n{op}    movrl {reg}, ZERO, {addr}\n"


def complete_check(p: str, contrib: str = "    movir X12, 0\n") -> str:
    """Report this lane's contribution once producers and acks are all done. Ends the thread."""
    return f"""\
    movlr X12, ZERO, {C_VDONE}
    movlr X13, ZERO, {C_NWORK}
    beq X12, X13, {p}_c1
    yieldt
{p}_c1:
    movlr X12, ZERO, {C_DONE}
    movlr X13, ZERO, {C_EXPECT}
    beq X12, X13, {p}_c2
    yieldt
{p}_c2:
    movlr X12, ZERO, {C_REPORTED}
    beq X12, ZERO, {p}_c3
    yieldt
{p}_c3:
    movir X12, 1
    movrl X12, ZERO, {C_REPORTED}
{contrib}    evi X13, NWID, NEW, @red_add
    sendr X13, X12
    yieldt
"""


def round_prologue(p: str, label: str, extra_resets: Sequence[int] = ()) -> str:
    """Reset round state and forward the round event (OB0 = round) to tree children."""
    resets = "".join(f"    movrl ZERO, ZERO, {a}\n" for a in extra_resets)
    return f"""\
    movlr X1, ZERO, {P_NCHILD}
    addi X2, X1, 1
    movrl X2, ZERO, {RED_PEND}
    movrl ZERO, ZERO, {RED_ACC}
    movrl ZERO, ZERO, {C_DONE}
    movrl ZERO, ZERO, {C_EXPECT}
    movrl ZERO, ZERO, {C_VDONE}
    movrl ZERO, ZERO, {C_REPORTED}
{resets}    movrl OB0, ZERO, {C_ROUND}
    beq X1, ZERO, {p}_go
    movlr X2, ZERO, {P_CHILD0}
    evi X3, X2, NEW, @{label}
    sendops X3
    subi X1, X1, 1
    beq X1, ZERO, {p}_go
    movlr X2, ZERO, {P_CHILD1}
    evi X3, X2, NEW, @{label}
    sendops X3
{p}_go:
"""


def reduce_handler(root_code: str) -> str:
    """red_add: OB0 = contribution; children then self feed the parent; root runs root_code."""
    return f"""\
red_add:
    movlr X1, ZERO, {RED_ACC}
    add X1, X1, OB0
    movrl X1, ZERO, {RED_ACC}
    movlr X2, ZERO, {RED_PEND}
    subi X2, X2, 1
    movrl X2, ZERO, {RED_PEND}
    beq X2, ZERO, Ra_fin
    yieldt
Ra_fin:
    beq NWID, ZERO, Ra_root
    movlr X3, ZERO, {P_PARENT}
    evi X4, X3, NEW, @red_add
    sendr X4, X1
    yieldt
Ra_root:
{root_code}"""


def rr_init(p: str) -> str:
    """X6 = next round-robin lane (own lane + 1, wrapping), X7 = accelerator end lane."""
    return f"""\
    movlr X7, ZERO, {P_ACCBASE}
    movlr X12, ZERO, {P_LPA}
    add X7, X7, X12
    addi X6, NWID, 1
    bgt X7, X6, {p}_rok
    movlr X6, ZERO, {P_ACCBASE}
{p}_rok:
"""


def rr_next(p: str) -> str:
    return f"""\
    addi X6, X6, 1
    bgt X7, X6, {p}_rr
    movlr X6, ZERO, {P_ACCBASE}
{p}_rr:
"""


def build_program(source: str) -> ProgramImage:
    return assemble(source)


def check_capacity(slot_bytes: int, contexts: int, table_words: int) -> int:
    """Return the table base; raise if slots plus tables overflow the scratchpad."""
    table = SLOT_BASE + slot_bytes * contexts
    if table + 8 * table_words > SCRATCH_BYTES:
        raise ValueError(f"scratchpad overflow: slots end at {table}, tables need "
                         f"{8 * table_words} more bytes")
    return table
