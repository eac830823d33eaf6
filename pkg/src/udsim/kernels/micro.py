"""Microbenchmark programs: streaming reads and thread spawning."""

from __future__ import annotations

from ..asm import assemble
from ..isa import ProgramImage

CHUNK = 64


def stream_source(nwords: int = 8, chunk: int = CHUNK) -> str:
    """Streaming reader.

    stream_start gets (start, end, total requests).  The thread keeps about
    2*chunk requests in flight: it issues 2*chunk up front, then another chunk
    each time chunk responses have come back.  Issue loop and response handler
    are three instructions each.
    """
    step = 8 * nwords
    return f"""\
.event stream_start, stream_resp

stream_start:
    add X0, OB0, ZERO
    add X1, OB1, ZERO
    add X4, OB2, ZERO
    movir X2, 0
    movir X3, {chunk}
    ev X13, NWID, TID, @stream_resp
    muli X5, X3, {2 * step}
    add X5, X5, X0
    ble X5, X1, S_issue
    add X5, X1, ZERO
S_issue:
    sendm X13, X0, {nwords}, R, X0
    addi X0, X0, {step}
    bgt X5, X0, S_issue
    yield

stream_resp:
    addi X2, X2, 1
    beq X2, X3, R_more
    yield
R_more:
    beq X2, X4, R_done
    addi X3, X3, {chunk}
    beq X0, X1, R_idle
    addi X5, X0, {chunk * step}
    ble X5, X1, R_issue
    add X5, X1, ZERO
R_issue:
    sendm X13, X0, {nwords}, R, X0
    addi X0, X0, {step}
    bgt X5, X0, R_issue
R_idle:
    yield
R_done:
    yieldt
"""


def stream_program(nwords: int = 8, chunk: int = CHUNK) -> ProgramImage:
    if not 1 <= nwords <= 8:
        raise ValueError("transfer size must be 1..8 words")
    return assemble(stream_source(nwords, chunk))


SPAWN_SOURCE = """\
.event spawn_start, spawn_child

# OB0 = target lane, OB1 = number of threads to create
spawn_start:
    evi X0, OB0, NEW, @spawn_child
    add X1, OB1, ZERO
    movir X2, 0
SP_loop:
    sendr X0, X2
    addi X2, X2, 1
    bgt X1, X2, SP_loop
    yieldt

spawn_child:
    yieldt
"""


def spawn_program() -> ProgramImage:
    return assemble(SPAWN_SOURCE)
