"""One lane: event queue, thread contexts, scratchpad and the instruction interpreter."""

from __future__ import annotations

import heapq
import struct
from array import array
from collections import Counter, deque
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .isa import (
    MASK64, NEW, NUM_GPRS, SR_CYCLE, SR_ECONT, SR_ELABEL, SR_EOPS, SR_ESRC,
    SR_NWID, SR_TID, WRITE, CodeLabel, EventLabel, Imm, ProgramImage, Reg,
)

VALID_BIT = 1 << 63
NEW_TID = 0xFF
NULL_EVWORD = 0
MEMORY_SRC = 0xFFFF_FFFE
HOST_SRC = 0xFFFF_FFFF

SCRATCHPAD_BYTES = 65536
INTERLEAVE_BYTES = 64

FREE, SUSPENDED, ACTIVE = 0, 1, 2
STATE_NAMES = {FREE: "FREE", SUSPENDED: "SUSPENDED", ACTIVE: "ACTIVE"}

_dbl = struct.Struct("<d")
_u64 = struct.Struct("<Q")


def bits_to_float(b: int) -> float:
    return _dbl.unpack(_u64.pack(b & MASK64))[0]


def float_to_bits(x: float) -> int:
    return _u64.unpack(_dbl.pack(x))[0]


def to_signed(v: int) -> int:
    return v - (1 << 64) if v >> 63 else v


def pack_evword(lane: int, tid: int, label: int) -> int:
    return VALID_BIT | (label & 0xFFFF) << 40 | (tid & 0xFF) << 32 | (lane & 0xFFFF_FFFF)


class EventWord(NamedTuple):
    dst_lane: int
    tid: int  # NEW_TID for a fresh thread
    label: int

    def pack(self) -> int:
        return pack_evword(self.dst_lane, self.tid, self.label)

    @staticmethod
    def unpack(word: int) -> "EventWord":
        if not word & VALID_BIT:
            raise ValueError("NULL event word")
        return EventWord(word & 0xFFFF_FFFF, (word >> 32) & 0xFF, (word >> 40) & 0xFFFF)

    @property
    def is_new(self) -> bool:
        return self.tid == NEW_TID


class Event(NamedTuple):
    evword: int
    operands: Tuple[int, ...] = ()
    continuation: int = NULL_EVWORD
    src: int = HOST_SRC

    @property
    def dst_lane(self) -> int:
        return self.evword & 0xFFFF_FFFF

    @property
    def tid(self) -> int:
        return (self.evword >> 32) & 0xFF

    @property
    def label(self) -> int:
        return (self.evword >> 40) & 0xFFFF


class MemRequest:
    __slots__ = ("addr", "nwords", "is_write", "payload", "continuation",
                 "issue_cycle", "req_id", "src_lane", "pc")

    def __init__(self, addr, nwords, is_write, payload, continuation, issue_cycle=0,
                 src_lane=-1, pc=-1):
        self.addr = addr
        self.nwords = nwords
        self.is_write = is_write
        self.payload = payload
        self.continuation = continuation
        self.issue_cycle = issue_cycle
        self.req_id = -1
        self.src_lane = src_lane
        self.pc = pc

    @property
    def kind(self) -> str:
        return "WRITE" if self.is_write else "READ"

    def __repr__(self):
        return f"MemRequest({self.kind}, addr={self.addr:#x}, nwords={self.nwords})"


class SimFault(Exception):
    def __init__(self, message, lane=None, pc=None, tid=None, cycle=None):
        self.message = message
        self.lane = lane
        self.pc = pc
        self.tid = tid
        self.cycle = cycle
        ctx = []
        for k in ("lane", "pc", "tid", "cycle"):
            v = getattr(self, k)
            if v is not None:
                ctx.append(f"{k}={v}")
        super().__init__(message + (f" ({', '.join(ctx)})" if ctx else ""))


class ThreadContext:
    __slots__ = ("tid", "gprs", "state", "spawn_cycle", "invocations")

    def __init__(self, tid: int):
        self.tid = tid
        self.gprs = [0] * NUM_GPRS
        self.state = FREE
        self.spawn_cycle = 0
        self.invocations = 0


# ---------------------------------------------------------------- op bodies
# Each op is fn(lane, ins, cycle) where ins is the compiled tuple (fn, args...).

def _add(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] + r[i[3]]) & MASK64
    ln.pc += 1


def _sub(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] - r[i[3]]) & MASK64
    ln.pc += 1


def _and(ln, i, c):
    r = ln.regs
    r[i[1]] = r[i[2]] & r[i[3]]
    ln.pc += 1


def _or(ln, i, c):
    r = ln.regs
    r[i[1]] = r[i[2]] | r[i[3]]
    ln.pc += 1


def _mul(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] * r[i[3]]) & MASK64
    ln.pc += 1


def _div(ln, i, c):
    r = ln.regs
    if r[i[3]] == 0:
        raise ln.fault("division by zero", c)
    r[i[1]] = r[i[2]] // r[i[3]]
    ln.pc += 1


def _mod(ln, i, c):
    r = ln.regs
    if r[i[3]] == 0:
        raise ln.fault("division by zero", c)
    r[i[1]] = r[i[2]] % r[i[3]]
    ln.pc += 1


def _addi(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] + i[3]) & MASK64
    ln.pc += 1


def _subi(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] - i[3]) & MASK64
    ln.pc += 1


def _andi(ln, i, c):
    r = ln.regs
    r[i[1]] = r[i[2]] & i[3]
    ln.pc += 1


def _ori(ln, i, c):
    r = ln.regs
    r[i[1]] = r[i[2]] | i[3]
    ln.pc += 1


def _muli(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] * i[3]) & MASK64
    ln.pc += 1


def _slli(ln, i, c):
    r = ln.regs
    r[i[1]] = (r[i[2]] << (i[3] & 63)) & MASK64
    ln.pc += 1


def _srli(ln, i, c):
    r = ln.regs
    r[i[1]] = r[i[2]] >> (i[3] & 63)
    ln.pc += 1


def _movir(ln, i, c):
    ln.regs[i[1]] = i[2]
    ln.pc += 1


def _fadd(ln, i, c):
    r = ln.regs
    r[i[1]] = float_to_bits(bits_to_float(r[i[2]]) + bits_to_float(r[i[3]]))
    ln.pc += 1


def _fmul(ln, i, c):
    r = ln.regs
    r[i[1]] = float_to_bits(bits_to_float(r[i[2]]) * bits_to_float(r[i[3]]))
    ln.pc += 1


def _fdiv(ln, i, c):
    r = ln.regs
    den = bits_to_float(r[i[3]])
    if den == 0.0:
        raise ln.fault("floating-point division by zero", c)
    r[i[1]] = float_to_bits(bits_to_float(r[i[2]]) / den)
    ln.pc += 1


def _fcvt(ln, i, c):
    r = ln.regs
    r[i[1]] = float_to_bits(float(to_signed(r[i[2]])))
    ln.pc += 1


def _beq(ln, i, c):
    r = ln.regs
    ln.pc = i[3] if r[i[1]] == r[i[2]] else ln.pc + 1


def _ble(ln, i, c):
    r = ln.regs
    a, b = r[i[1]], r[i[2]]
    if a >> 63:
        a -= 1 << 64
    if b >> 63:
        b -= 1 << 64
    ln.pc = i[3] if a <= b else ln.pc + 1


def _bgt(ln, i, c):
    r = ln.regs
    a, b = r[i[1]], r[i[2]]
    if a >> 63:
        a -= 1 << 64
    if b >> 63:
        b -= 1 << 64
    ln.pc = i[3] if a > b else ln.pc + 1


def _movlr(ln, i, c):
    r = ln.regs
    r[i[1]] = ln.sp[ln.sp_index((r[i[2]] + i[3]) & MASK64, c)]
    ln.pc += 1


def _movrl(ln, i, c):
    r = ln.regs
    ln.sp[ln.sp_index((r[i[2]] + i[3]) & MASK64, c)] = r[i[1]]
    ln.pc += 1


def _bcpy(ln, i, c):
    r = ln.regs
    dst, src, n = r[i[1]], r[i[2]], r[i[3]]
    if n:
        d0 = ln.sp_index(dst, c)
        s0 = ln.sp_index(src, c)
        ln.sp_index(dst + 8 * (n - 1), c)
        ln.sp_index(src + 8 * (n - 1), c)
        sp = ln.sp
        sp[d0:d0 + n] = sp[s0:s0 + n]
        ln.multi_cycle(n, c)
    ln.pc += 1


def _bcpyol(ln, i, c):
    r = ln.regs
    k = r[SR_EOPS]
    if k:
        d0 = ln.sp_index(r[i[1]], c)
        ln.sp_index(r[i[1]] + 8 * (k - 1), c)
        ln.sp[d0:d0 + k] = array("Q", r[16:16 + k])
    ln.pc += 1


def _cstr(ln, i, c):
    r = ln.regs
    dst, src, n, key = r[i[2]], r[i[3]], r[i[4]], to_signed(r[i[5]])
    sp = ln.sp
    copied = 0
    while copied < n:
        w = sp[ln.sp_index(src + 8 * copied, c)]
        if to_signed(w) >= key:
            break
        sp[ln.sp_index(dst + 8 * copied, c)] = w
        copied += 1
    r[i[1]] = copied
    if copied > 1:
        ln.multi_cycle(copied, c)
    ln.pc += 1


def _cswp(ln, i, c):
    r = ln.regs
    k = ln.sp_index(r[i[2]], c)
    if ln.sp[k] == r[i[3]]:
        ln.sp[k] = r[i[4]]
        r[i[1]] = 1
    else:
        r[i[1]] = 0
    ln.pc += 1


def _ev(ln, i, c):
    r = ln.regs
    r[i[1]] = pack_evword(r[i[2]], r[i[3]], i[4])
    ln.pc += 1


def _evi(ln, i, c):
    r = ln.regs
    r[i[1]] = pack_evword(r[i[2]], NEW_TID, i[3])
    ln.pc += 1


def _evii(ln, i, c):
    ln.regs[i[1]] = pack_evword(i[2], NEW_TID, i[3])
    ln.pc += 1


def _emit(ln, word, ops, c):
    if not word & VALID_BIT:
        raise ln.fault("send to NULL event word", c)
    ln.out.append(Event(word, ops, NULL_EVWORD, ln.lane_id))
    ln.events_sent += 1


def _send(ln, i, c):
    r = ln.regs
    g = i[2]
    _emit(ln, r[i[1]], tuple(r[g:g + i[3]]), c)
    ln.pc += 1


def _sendr(ln, i, c):
    r = ln.regs
    _emit(ln, r[i[1]], tuple([r[s] for s in i[2]]), c)
    ln.pc += 1


def _sendops(ln, i, c):
    r = ln.regs
    _emit(ln, r[i[1]], tuple(r[16:16 + r[SR_EOPS]]), c)
    ln.pc += 1


def _memreq(ln, cont, addr, nwords, is_write, payload, c):
    if addr & 7:
        raise ln.fault(f"misaligned DRAM address {addr:#x}", c)
    if (addr % INTERLEAVE_BYTES) + 8 * nwords > INTERLEAVE_BYTES:
        raise ln.fault(f"DRAM request at {addr:#x} ({nwords} words) crosses a 64-byte block", c)
    ln.out.append(MemRequest(addr, nwords, is_write, payload, cont, c, ln.lane_id, ln.pc))
    ln.cur_mem += 1


def _sendm(ln, i, c):
    r = ln.regs
    n = i[3]
    payload = tuple(r[i[5]:i[5] + n]) if i[4] else None
    _memreq(ln, r[i[1]], r[i[2]], n, i[4], payload, c)
    ln.pc += 1


def _sendmr(ln, i, c):
    r = ln.regs
    payload = tuple([r[s] for s in i[3]])
    _memreq(ln, r[i[1]], r[i[2]], len(payload), True, payload, c)
    ln.pc += 1


def _sendmops(ln, i, c):
    r = ln.regs
    k = r[SR_EOPS]
    if not k:
        raise ln.fault("sendmops with zero operands", c)
    _memreq(ln, r[i[1]], r[i[2]], k, True, tuple(r[16:16 + k]), c)
    ln.pc += 1


def _yield(ln, i, c):
    ln.end_invocation(c, terminate=False)


def _yieldt(ln, i, c):
    ln.end_invocation(c, terminate=True)


_OPS = {
    "add": _add, "sub": _sub, "and": _and, "or": _or, "mul": _mul, "div": _div, "mod": _mod,
    "addi": _addi, "subi": _subi, "andi": _andi, "ori": _ori, "muli": _muli,
    "slli": _slli, "srli": _srli, "movir": _movir,
    "fadd": _fadd, "fmul": _fmul, "fdiv": _fdiv, "fcvt": _fcvt,
    "beq": _beq, "ble": _ble, "bgt": _bgt,
    "movlr": _movlr, "movrl": _movrl, "bcpy": _bcpy, "bcpyol": _bcpyol,
    "cstr": _cstr, "cswp": _cswp,
    "ev": _ev, "evi": _evi, "evii": _evii,
    "send": _send, "sendr": _sendr, "sendops": _sendops,
    "sendm": _sendm, "sendmr": _sendmr, "sendmops": _sendmops,
    "yield": _yield, "yieldt": _yieldt,
}


def compile_program(image: ProgramImage):
    """Lower an image to (code, entries): tuples with resolved slots and targets."""
    ids = image.label_table
    code = []
    entries = []
    for h in image.handlers:
        entries.append(h.entry_offset)
        index = h.label_index()
        for ins in h.body:
            args = []
            regs_tail = []
            for pos, op in enumerate(ins.operands):
                if isinstance(op, Reg):
                    if ins.opcode in ("sendr", "sendmr") and pos >= (1 if ins.opcode == "sendr" else 2):
                        regs_tail.append(op.slot)
                    else:
                        args.append(op.slot)
                elif isinstance(op, Imm):
                    args.append(op.value & MASK64 if ins.opcode in ("movir", "andi", "ori") else op.value)
                elif isinstance(op, CodeLabel):
                    args.append(h.entry_offset + index[op.name])
                elif isinstance(op, EventLabel):
                    args.append(ids[op.name])
                elif op == NEW:
                    continue
                else:  # R / W
                    args.append(op == WRITE)
            if regs_tail:
                args.append(tuple(regs_tail))
            code.append((_OPS[ins.opcode], *args))
    return code, entries


class Lane:
    """A single-issue event-driven lane.

    The fabric calls :meth:`step` once per cycle while the lane is runnable and
    drains :attr:`out` (outbound events and memory requests) after each step.
    """

    def __init__(self, lane_id: int, code, entries: Sequence[int], n_contexts: int = 128,
                 queue_high_water: int = 1024, dispatch_penalty: int = 0,
                 operand_penalty: int = 0, dispatch_overlap: bool = True):
        self.lane_id = lane_id
        self.code = code
        self.entries = list(entries)
        self.n_contexts = n_contexts
        self.contexts = [ThreadContext(t) for t in range(n_contexts)]
        self.free = list(range(n_contexts))  # min-heap of free tids
        self.regs = [0] * 32
        self.regs[SR_NWID] = lane_id
        self.active: Optional[ThreadContext] = None
        self.pc = -1
        self.new_q: deque = deque()
        self.bound_q: deque = deque()
        self.seq = 0
        self.busy_until = -1
        self.out: list = []
        self.sp = array("Q", bytes(SCRATCHPAD_BYTES))
        self.queue_high_water = queue_high_water
        self.dispatch_penalty = dispatch_penalty
        self.operand_penalty = operand_penalty
        self.dispatch_overlap = dispatch_overlap
        self.cycle = 0
        # stats
        self.busy_cycles = 0
        self.dispatch_cycles = 0
        self.penalty_cycles = 0
        self.stall_cycles = 0
        self.invocations = 0
        self.threads_created = 0
        self.threads_finished = 0
        self.lifetime_sum = 0
        self.events_received = 0
        self.events_sent = 0
        self.queue_max = 0
        self.high_water_events = 0
        self.inst_hist: Counter = Counter()
        self.mem_hist: Counter = Counter()
        self.label_counts: Counter = Counter()
        self.spawn_log: Optional[list] = None
        self.cur_instrs = 0
        self.cur_mem = 0

    # -------------------------------------------------------------- helpers
    def fault(self, message: str, cycle=None) -> SimFault:
        tid = self.active.tid if self.active is not None else None
        return SimFault(message, self.lane_id, self.pc, tid, cycle)

    def sp_index(self, addr: int, cycle=None) -> int:
        if addr & 7:
            raise self.fault(f"misaligned scratchpad access at {addr:#x}", cycle)
        if addr >= SCRATCHPAD_BYTES:
            raise self.fault(f"scratchpad access out of bounds at {addr:#x}", cycle)
        return addr >> 3

    def multi_cycle(self, n: int, cycle: int) -> None:
        """Charge n-1 extra busy cycles for an instruction issued this cycle."""
        self.busy_until = cycle + n - 1
        self.busy_cycles += n - 1

    def read_scratch(self, addr: int) -> int:
        return self.sp[self.sp_index(addr)]

    def write_scratch(self, addr: int, value: int) -> None:
        self.sp[self.sp_index(addr)] = value & MASK64

    @property
    def queue_depth(self) -> int:
        return len(self.new_q) + len(self.bound_q)

    def state_counts(self) -> Counter:
        return Counter(STATE_NAMES[c.state] for c in self.contexts)

    def runnable(self) -> bool:
        return self.active is not None or bool(self.bound_q) or (bool(self.new_q) and bool(self.free))

    def idle(self) -> bool:
        return self.active is None and not self.new_q and not self.bound_q

    # -------------------------------------------------------------- events
    def enqueue(self, ev: Event) -> None:
        self.seq += 1
        if (ev.evword >> 32) & 0xFF == NEW_TID:
            self.new_q.append((self.seq, ev))
        else:
            self.bound_q.append((self.seq, ev))
        self.events_received += 1
        depth = len(self.new_q) + len(self.bound_q)
        if depth > self.queue_max:
            self.queue_max = depth
        if depth > self.queue_high_water:
            self.high_water_events += 1

    def dispatch(self, cycle: int) -> bool:
        """Bind the next dispatchable event to a thread and start its handler."""
        nq, bq = self.new_q, self.bound_q
        if nq and (not bq or nq[0][0] < bq[0][0]):
            if self.free:
                ev = nq.popleft()[1]
                ctx = self.contexts[heapq.heappop(self.free)]
                ctx.gprs = [0] * NUM_GPRS
                ctx.spawn_cycle = cycle
                ctx.invocations = 0
                self.threads_created += 1
                if self.spawn_log is not None:
                    self.spawn_log.append(cycle)
            elif bq:
                ev = bq.popleft()[1]
                ctx = None
            else:
                return False
        elif bq:
            ev = bq.popleft()[1]
            ctx = None
        else:
            return False
        word = ev.evword
        if ctx is None:
            tid = (word >> 32) & 0xFF
            if tid >= self.n_contexts or self.contexts[tid].state != SUSPENDED:
                raise SimFault("dangling thread binding", self.lane_id, None, tid, cycle)
            ctx = self.contexts[tid]
        label = (word >> 40) & 0xFFFF
        if label >= len(self.entries):
            raise SimFault(f"unknown event label {label}", self.lane_id, None, ctx.tid, cycle)
        ops = ev.operands
        k = len(ops)
        r = self.regs
        r[0:16] = ctx.gprs
        r[16:16 + k] = ops
        if k < 8:
            r[16 + k:24] = [0] * (8 - k)
        r[SR_TID] = ctx.tid
        r[SR_ELABEL] = label
        r[SR_ECONT] = ev.continuation
        r[SR_EOPS] = k
        r[SR_ESRC] = ev.src
        ctx.state = ACTIVE
        ctx.invocations += 1
        self.active = ctx
        self.pc = self.entries[label]
        self.invocations += 1
        self.label_counts[label] += 1
        self.cur_instrs = 0
        self.cur_mem = 0
        penalty = self.dispatch_penalty + self.operand_penalty * k
        if penalty:
            self.busy_until = cycle + penalty
            self.penalty_cycles += penalty
        return True

    def end_invocation(self, cycle: int, terminate: bool) -> None:
        ctx = self.active
        self.inst_hist[self.cur_instrs] += 1
        self.mem_hist[self.cur_mem] += 1
        if terminate:
            ctx.state = FREE
            heapq.heappush(self.free, ctx.tid)
            self.threads_finished += 1
            self.lifetime_sum += cycle - ctx.spawn_cycle
        else:
            ctx.gprs = self.regs[0:16]
            ctx.state = SUSPENDED
        self.active = None
        self.pc = -1
        if self.dispatch_overlap and self.busy_until < cycle:
            self.dispatch(cycle)

    # -------------------------------------------------------------- stepping
    def step(self, cycle: int) -> list:
        """Advance one cycle; returns the outbox (drained by the caller)."""
        if self.active is None:
            if self.dispatch(cycle):
                self.dispatch_cycles += 1
            return self.out
        self.regs[SR_CYCLE] = cycle
        self.busy_cycles += 1
        self.cur_instrs += 1
        ins = self.code[self.pc]
        ins[0](self, ins, cycle)
        return self.out
