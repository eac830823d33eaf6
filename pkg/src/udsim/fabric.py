"""Node composition: lanes, NoC routing, memory and the global cycle loop."""

from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

from .isa import ProgramImage
from .lane import (
    HOST_SRC, MEMORY_SRC, NEW_TID, NULL_EVWORD, VALID_BIT, Event, Lane, MemRequest,
    SimFault, compile_program, pack_evword,
)
from .memory import DramImage, MemorySystem, MemoryTiming
from .stats import SimStats, collect_stats


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NodeConfig:
    accelerators: int = 32
    lanes_per_accelerator: int = 64
    clock_hz: float = 2e9
    noc_latency_intra: int = 10
    noc_latency_inter: int = 30
    # memory timing
    dram_latency: int = 200
    channel_gbps: float = 57.5
    port_gbps: Optional[float] = 460.0
    stacks: int = 8
    channels_per_stack: int = 8
    interleave_bytes: int = 64
    dram_bytes: int = 16 << 30
    # lane mechanisms (set from ablation points by the harness)
    contexts_per_lane: int = 128
    split_transaction: bool = True
    dispatch_penalty: int = 0
    operand_penalty: int = 0
    dispatch_overlap: bool = True
    queue_high_water: int = 1024
    sample_interval: int = 100
    max_cycles: int = 2_000_000_000

    def __post_init__(self):
        for name in ("accelerators", "lanes_per_accelerator", "stacks", "channels_per_stack",
                     "contexts_per_lane", "sample_interval", "max_cycles", "noc_latency_intra",
                     "noc_latency_inter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.contexts_per_lane > 255:
            raise ConfigError("contexts_per_lane must be <= 255")
        if self.dispatch_penalty < 0 or self.operand_penalty < 0 or self.dram_latency < 0:
            raise ConfigError("penalties and latency must be non-negative")
        if self.clock_hz <= 0 or self.channel_gbps <= 0:
            raise ConfigError("clock and channel bandwidth must be positive")

    @property
    def n_lanes(self) -> int:
        return self.accelerators * self.lanes_per_accelerator

    def accelerator_of(self, lane: int) -> int:
        return lane // self.lanes_per_accelerator

    def memory_timing(self) -> MemoryTiming:
        return MemoryTiming(self.dram_latency, self.channel_gbps, self.port_gbps, self.clock_hz,
                            self.stacks, self.channels_per_stack, self.interleave_bytes)

    def with_(self, **kw) -> "NodeConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NodeConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown node config keys: {sorted(bad)}")
        return cls(**d)


class Halt(str, Enum):
    QUIESCENT = "QUIESCENT"
    MAX_CYCLES = "MAX_CYCLES"
    FAULT = "FAULT"


class InFlightMessage(NamedTuple):
    deliver_cycle: int
    seq: int
    event: Event


class BootEvent(NamedTuple):
    lane: int
    label: str
    operands: Sequence[int] = ()
    continuation: int = NULL_EVWORD

    def to_event(self, program: ProgramImage) -> Event:
        try:
            label = program.event_id(self.label)
        except KeyError:
            raise ConfigError(f"boot event names unknown label {self.label!r}") from None
        ops = tuple(int(o) & ((1 << 64) - 1) for o in self.operands)
        if len(ops) > 8:
            raise ConfigError("boot event carries more than 8 operands")
        return Event(pack_evword(self.lane, NEW_TID, label), ops, self.continuation, HOST_SRC)


@dataclass
class SimResult:
    halted: Halt
    final_cycle: int
    stats: SimStats
    fault: Optional[SimFault] = None
    node: Optional["Node"] = None

    @property
    def ok(self) -> bool:
        return self.halted is Halt.QUIESCENT


class Node:
    def __init__(self, config: NodeConfig, program: ProgramImage, dram: Optional[DramImage] = None):
        self.config = config
        self.program = program
        self.dram = dram if dram is not None else DramImage(config.dram_bytes)
        code, entries = compile_program(program)
        self.lanes = [
            Lane(i, code, entries, config.contexts_per_lane, config.queue_high_water,
                 config.dispatch_penalty, config.operand_penalty, config.dispatch_overlap)
            for i in range(config.n_lanes)
        ]
        self.memory = MemorySystem(config.memory_timing(), self.dram, config.accelerators,
                                   config.lanes_per_accelerator, config.sample_interval)
        self.msgs: list = []
        self.seq = 0
        self.sent = 0
        self.delivered = 0
        self.cycle = 0
        self.last_active = -1
        self.halted: Optional[Halt] = None
        self.fault: Optional[SimFault] = None
        self._awake: set = set()
        self._wake: list = []
        self._started = False

    # ------------------------------------------------------------ host side
    def load_scratch(self, init: Dict[int, Dict[int, int]]) -> None:
        """Zero-time host writes: {lane: {byte_addr: word}}."""
        for lane, words in init.items():
            ln = self.lanes[lane]
            for addr, value in words.items():
                ln.write_scratch(addr, value)

    def inject(self, events: Iterable[Union[Event, BootEvent]]) -> None:
        for ev in events:
            if isinstance(ev, BootEvent):
                ev = ev.to_event(self.program)
            dst = ev.dst_lane
            if not ev.evword & VALID_BIT or dst >= len(self.lanes):
                raise SimFault("invalid destination lane", lane=dst, cycle=self.cycle)
            self.lanes[dst].enqueue(ev)
            self._awake.add(dst)

    # ------------------------------------------------------------ routing
    def route(self, ev: Event, send_cycle: int, src_lane: int) -> InFlightMessage:
        dst = ev.evword & 0xFFFF_FFFF
        if dst >= len(self.lanes):
            raise SimFault("invalid destination lane", lane=src_lane, cycle=send_cycle)
        lpa = self.config.lanes_per_accelerator
        if dst // lpa == src_lane // lpa:
            deliver = send_cycle + self.config.noc_latency_intra
        else:
            deliver = send_cycle + self.config.noc_latency_inter
        self.seq += 1
        msg = InFlightMessage(deliver, self.seq, ev)
        heapq.heappush(self.msgs, msg)
        self.sent += 1
        return msg

    def _drain(self, ln: Lane, out: list, c: int) -> None:
        blocking = not self.config.split_transaction
        for item in out:
            if type(item) is Event:
                try:
                    self.route(item, c, ln.lane_id)
                except SimFault as f:
                    raise SimFault(f.message, ln.lane_id, ln.pc, None, c) from None
            else:
                try:
                    complete = self.memory.submit(item, c)
                except ValueError as e:
                    raise SimFault(str(e), ln.lane_id, item.pc, None, c) from None
                if blocking and complete > ln.busy_until:
                    ln.stall_cycles += complete - max(ln.busy_until, c)
                    ln.busy_until = complete
        out.clear()

    # ------------------------------------------------------------ main loop
    def _loop(self, limit: int) -> Optional[Halt]:
        lanes = self.lanes
        mem = self.memory
        msgs = self.msgs
        wake = self._wake
        awake = self._awake
        c = self.cycle
        while True:
            if c > limit:
                self.cycle = limit + 1
                return None
            while wake and wake[0][0] <= c:
                lid = heapq.heappop(wake)[1]
                if lanes[lid].busy_until < c and lanes[lid].runnable():
                    awake.add(lid)
            active = bool(awake)
            if awake:
                for lid in sorted(awake):
                    ln = lanes[lid]
                    out = ln.step(c)
                    if out:
                        self._drain(ln, out, c)
                    if ln.busy_until >= c + 1:
                        awake.discard(lid)
                        heapq.heappush(wake, (ln.busy_until + 1, lid))
                    elif not ln.runnable():
                        awake.discard(lid)
            while msgs and msgs[0][0] <= c:
                ev = heapq.heappop(msgs).event
                lid = ev.evword & 0xFFFF_FFFF
                ln = lanes[lid]
                ln.enqueue(ev)
                self.delivered += 1
                active = True
                if ln.busy_until <= c and ln.runnable():
                    awake.add(lid)
            if mem.heap and mem.heap[0][0] <= c:
                active = True
                for resp in mem.tick(c):
                    cont = resp.continuation
                    if not cont & VALID_BIT:
                        continue
                    lid = cont & 0xFFFF_FFFF
                    if lid >= len(lanes):
                        raise SimFault("invalid destination lane in continuation", resp.src_lane, None, None, c)
                    ln = lanes[lid]
                    ln.enqueue(Event(cont, resp.payload, resp.addr, MEMORY_SRC))
                    if ln.busy_until <= c and ln.runnable():
                        awake.add(lid)
            if active or (wake and wake[0][0] <= c + 1):
                self.last_active = c
            if awake:
                c += 1
                continue
            nxt = []
            if wake:
                nxt.append(wake[0][0])
            if msgs:
                nxt.append(msgs[0][0])
            if mem.heap:
                nxt.append(mem.heap[0][0])
            if not nxt:
                self.cycle = c + 1
                stuck = [ln.lane_id for ln in lanes if ln.queue_depth]
                if stuck:
                    ln = lanes[stuck[0]]
                    raise SimFault(f"deadlock: {ln.queue_depth} undispatchable events "
                                   f"(no free thread context)", ln.lane_id, None, None, c)
                return Halt.QUIESCENT
            c = max(c + 1, min(nxt))

    def advance(self, cycles: int) -> Optional[Halt]:
        """Run at most ``cycles`` more cycles; the simulation stays open if unfinished."""
        return self._run(min(self.cycle + cycles - 1, self.config.max_cycles - 1), final=False)

    def run(self) -> SimResult:
        self._run(self.config.max_cycles - 1, final=True)
        return self.result()

    def _run(self, limit: int, final: bool) -> Optional[Halt]:
        if self.halted is not None:
            return self.halted
        self.dram.in_simulation = True
        if not self._started:
            self._started = True
            self._awake = {i for i in self._awake if self.lanes[i].runnable()}
        try:
            h = self._loop(limit)
        except SimFault as f:
            self.fault = f
            if f.cycle is not None:
                self.cycle = max(self.cycle, f.cycle)
            h = Halt.FAULT
        if h is None and final:
            h = Halt.MAX_CYCLES
        if h is not None:
            self.halted = h
            self.dram.in_simulation = False
        return h

    def final_cycle(self) -> int:
        if self.halted is Halt.QUIESCENT:
            return self.last_active + 1
        return self.cycle

    def result(self) -> SimResult:
        fc = self.final_cycle()
        return SimResult(self.halted, fc, collect_stats(self, fc), self.fault, self)


def run(config: NodeConfig, program: ProgramImage, dram: Optional[DramImage],
        boot: Iterable[Union[Event, BootEvent]],
        scratch_init: Optional[Dict[int, Dict[int, int]]] = None) -> SimResult:
    """Load the program on every lane, inject boot events at cycle 0, run to halt."""
    node = Node(config, program, dram)
    if scratch_init:
        node.load_scratch(scratch_init)
    try:
        node.inject(boot)
    except SimFault as f:
        node.fault = f
        node.halted = Halt.FAULT
        return node.result()
    return node.run()


@dataclass(frozen=True)
class ResultField:
    name: str
    addr: int
    count: int = 1
    dtype: str = "u64"  # u64 | i64 | f64
    lane: Optional[int] = None  # scratchpad of this lane when set, else DRAM


def _convert(words: List[int], dtype: str):
    from .lane import bits_to_float, to_signed
    if dtype == "u64":
        return words
    if dtype == "i64":
        return [to_signed(w) for w in words]
    if dtype == "f64":
        return [bits_to_float(w) for w in words]
    raise ValueError(f"unknown dtype {dtype}")


def host_collect(result_spec: Iterable[ResultField], dram: DramImage, lanes: Sequence[Lane] = ()):
    """Read the designated result words after the run has halted."""
    if dram.in_simulation:
        raise RuntimeError("simulation still running")
    out = {}
    for f in result_spec:
        if f.lane is None:
            words = dram.read_words(f.addr, f.count)
        else:
            if not 0 <= f.lane < len(lanes):
                raise ValueError(f"result lane {f.lane} out of range")
            words = [lanes[f.lane].read_scratch(f.addr + 8 * k) for k in range(f.count)]
        vals = _convert(words, f.dtype)
        out[f.name] = vals[0] if f.count == 1 else vals
    return out
