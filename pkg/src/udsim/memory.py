"""DRAM image and the split-transaction timing model.

Timing runs in integer sub-cycle units so fractional pacing (28.75 B/cycle per
channel by default) accumulates exactly.  Each request is timed when it is
submitted: the accelerator port and the target channel are both FIFO, so the
completion cycle is already determined at that point.
"""

from __future__ import annotations

import heapq
import io
import math
import struct
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import BinaryIO, Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

from .isa import MASK64
from .lane import MEMORY_SRC, VALID_BIT, Event, MemRequest

CHECKPOINT_MAGIC = b"UDDRAM01"


class HostAccessError(RuntimeError):
    pass


class DramImage:
    """Sparse word-granular byte store; unwritten bytes read as zero."""

    def __init__(self, size: int = 16 << 30):
        self.size = size
        self.words: Dict[int, int] = {}
        self.in_simulation = False

    # simulation-side word access (addr is 8-byte aligned)
    def load(self, addr: int) -> int:
        return self.words.get(addr, 0)

    def store(self, addr: int, value: int) -> None:
        if value:
            self.words[addr] = value
        else:
            self.words.pop(addr, None)

    def _host_check(self, addr: int, length: int) -> None:
        if self.in_simulation:
            raise HostAccessError("host access during simulation")
        if addr < 0 or length < 0 or addr + length > self.size:
            raise ValueError(f"address range [{addr:#x}, {addr + length:#x}) outside DRAM")

    def host_write(self, addr: int, data: Union[bytes, bytearray, Iterable[int]]) -> None:
        """Write raw bytes, or a sequence of 64-bit words, starting at addr."""
        if not isinstance(data, (bytes, bytearray)):
            data = b"".join(struct.pack("<Q", w & MASK64) for w in data)
        self._host_check(addr, len(data))
        if addr % 8 == 0 and len(data) % 8 == 0:
            for k in range(0, len(data), 8):
                self.store(addr + k, int.from_bytes(data[k:k + 8], "little"))
            return
        start = addr - addr % 8
        end = -(-(addr + len(data)) // 8) * 8
        buf = bytearray(self.host_read(start, end - start))
        buf[addr - start:addr - start + len(data)] = data
        for k in range(0, len(buf), 8):
            self.store(start + k, int.from_bytes(buf[k:k + 8], "little"))

    def host_read(self, addr: int, length: int) -> bytes:
        self._host_check(addr, length)
        start = addr - addr % 8
        end = -(-(addr + length) // 8) * 8
        buf = b"".join(self.words.get(a, 0).to_bytes(8, "little") for a in range(start, end, 8))
        return buf[addr - start:addr - start + length]

    def write_words(self, addr: int, words: Iterable[int]) -> None:
        self.host_write(addr, list(words))

    def read_words(self, addr: int, count: int) -> List[int]:
        self._host_check(addr, 8 * count)
        return [self.words.get(addr + 8 * k, 0) for k in range(count)]

    def regions(self) -> List[Tuple[int, bytes]]:
        """Maximal runs of consecutive non-zero words, sorted by address."""
        out = []
        run_start = None
        prev = None
        chunk: List[bytes] = []
        for a in sorted(self.words):
            if prev is None or a != prev + 8:
                if run_start is not None:
                    out.append((run_start, b"".join(chunk)))
                run_start, chunk = a, []
            chunk.append(self.words[a].to_bytes(8, "little"))
            prev = a
        if run_start is not None:
            out.append((run_start, b"".join(chunk)))
        return out

    def save_checkpoint(self, fp: BinaryIO) -> None:
        regions = self.regions()
        fp.write(CHECKPOINT_MAGIC)
        fp.write(struct.pack("<QQ", self.size, len(regions)))
        for off, data in regions:
            fp.write(struct.pack("<QQ", off, len(data)))
            fp.write(data)

    def checkpoint_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.save_checkpoint(buf)
        return buf.getvalue()

    @classmethod
    def load_checkpoint(cls, fp: BinaryIO) -> "DramImage":
        if fp.read(8) != CHECKPOINT_MAGIC:
            raise ValueError("not a DRAM checkpoint")
        size, count = struct.unpack("<QQ", fp.read(16))
        img = cls(size)
        for _ in range(count):
            off, length = struct.unpack("<QQ", fp.read(16))
            img.host_write(off, fp.read(length))
        return img


@dataclass(frozen=True)
class MemoryTiming:
    latency_cycles: int = 200
    channel_gbps: float = 57.5
    port_gbps: Optional[float] = 460.0  # None disables the per-accelerator cap
    clock_hz: float = 2e9
    stacks: int = 8
    channels_per_stack: int = 8
    interleave_bytes: int = 64

    @property
    def channel_bytes_per_cycle(self) -> float:
        return self.channel_gbps * 1e9 / self.clock_hz

    @property
    def port_bytes_per_cycle(self) -> Optional[float]:
        return None if not self.port_gbps else self.port_gbps * 1e9 / self.clock_hz


class MemResponse(NamedTuple):
    req_id: int
    payload: Tuple[int, ...]
    continuation: int
    complete_cycle: int
    addr: int
    src_lane: int
    is_write: bool

    def to_event(self) -> Event:
        return Event(self.continuation, self.payload, self.addr, MEMORY_SRC)


@dataclass
class ChannelState:
    stack: int
    channel: int
    next_free: int = 0  # sub-cycle units
    bytes_served: int = 0
    requests: int = 0


def _rate_units(rates: List[Fraction]) -> Tuple[int, List[int]]:
    """Pick a time unit U (sub-cycles per cycle) making every per-byte cost integral."""
    unit = 1
    for r in rates:
        unit = unit * r.numerator // math.gcd(unit, r.numerator)
    return unit, [int(Fraction(unit) / r) for r in rates]


class MemorySystem:
    def __init__(self, timing: MemoryTiming, dram: DramImage, n_accelerators: int = 1,
                 lanes_per_accelerator: int = 64, sample_interval: int = 100):
        self.timing = timing
        self.dram = dram
        self.lanes_per_accelerator = lanes_per_accelerator
        ch_rate = Fraction(timing.channel_gbps * 1e9).limit_denominator(10**6) / Fraction(timing.clock_hz)
        rates = [ch_rate]
        port = timing.port_bytes_per_cycle
        if port:
            rates.append(Fraction(timing.port_gbps * 1e9).limit_denominator(10**6) / Fraction(timing.clock_hz))
        self.unit, costs = _rate_units(rates)
        self.ch_cost = costs[0]
        self.port_cost = costs[1] if port else 0
        self.n_channels = timing.stacks * timing.channels_per_stack
        self.channels = [ChannelState(s, c) for s in range(timing.stacks)
                         for c in range(timing.channels_per_stack)]
        self.port_free = [0] * n_accelerators
        self.heap: list = []
        self.next_id = 0
        # statistics
        self.sample_interval = sample_interval
        self.outstanding = 0
        self.max_outstanding = 0
        self.samples: List[Tuple[int, int]] = []
        self._next_sample = 0
        self._last_t = 0
        self.area = 0  # integral of outstanding over cycles
        self.lane_outstanding: Dict[int, int] = {}
        self.lane_area: Dict[int, int] = {}
        self.lane_last: Dict[int, int] = {}
        self.lane_max: Dict[int, int] = {}
        self.changes: List[Tuple[int, int]] = []  # (cycle, outstanding after change)
        self.completions: List[Tuple[int, int, int]] = []  # (complete, bytes, latency)
        self.bytes_read = 0
        self.bytes_written = 0
        self.submitted = 0
        self.completed = 0
        self.dropped_null = 0

    def channel_of(self, addr: int) -> Tuple[int, int]:
        block = addr // self.timing.interleave_bytes
        idx = block % self.n_channels
        return idx // self.timing.channels_per_stack, idx % self.timing.channels_per_stack

    # ----------------------------------------------------------- gauges
    def _advance(self, cycle: int) -> None:
        while self._next_sample <= cycle:
            self.samples.append((self._next_sample, self.outstanding))
            self._next_sample += self.sample_interval
        self.area += self.outstanding * (cycle - self._last_t)
        self._last_t = cycle

    def _lane_change(self, lane: int, cycle: int, delta: int) -> None:
        cur = self.lane_outstanding.get(lane, 0)
        last = self.lane_last.get(lane, cycle)
        self.lane_area[lane] = self.lane_area.get(lane, 0) + cur * (cycle - last)
        self.lane_last[lane] = cycle
        cur += delta
        self.lane_outstanding[lane] = cur
        if cur > self.lane_max.get(lane, 0):
            self.lane_max[lane] = cur

    def finalize(self, cycle: int) -> None:
        self._advance(cycle)
        for lane in list(self.lane_outstanding):
            self._lane_change(lane, cycle, 0)

    # ----------------------------------------------------------- traffic
    def submit(self, req: MemRequest, cycle: int) -> int:
        """Accept a request; returns the cycle its response completes."""
        t = self.timing
        if req.addr & 7:
            raise ValueError(f"misaligned DRAM address {req.addr:#x}")
        if not 1 <= req.nwords <= 8:
            raise ValueError(f"request size {req.nwords} outside 1..8 words")
        if req.addr % t.interleave_bytes + 8 * req.nwords > t.interleave_bytes:
            raise ValueError(f"request at {req.addr:#x} crosses an interleave boundary")
        if req.addr + 8 * req.nwords > self.dram.size:
            raise ValueError(f"DRAM address {req.addr:#x} out of range")
        nbytes = 8 * req.nwords
        now = cycle * self.unit
        depart = now
        if self.port_cost:
            acc = req.src_lane // self.lanes_per_accelerator if req.src_lane >= 0 else 0
            depart = max(now, self.port_free[acc])
            self.port_free[acc] = depart + nbytes * self.port_cost
        ch = self.channels[(req.addr // t.interleave_bytes) % self.n_channels]
        begin = max(depart, ch.next_free)
        ch.next_free = begin + nbytes * self.ch_cost
        ch.bytes_served += nbytes
        ch.requests += 1
        complete = -(-ch.next_free // self.unit) + t.latency_cycles

        req.req_id = self.next_id
        self.next_id += 1
        dram = self.dram
        if req.is_write:
            for k, w in enumerate(req.payload):
                dram.store(req.addr + 8 * k, w)
            payload = ()
            self.bytes_written += nbytes
        else:
            payload = tuple(dram.load(req.addr + 8 * k) for k in range(req.nwords))
            self.bytes_read += nbytes
        heapq.heappush(self.heap, (complete, req.req_id,
                                   MemResponse(req.req_id, payload, req.continuation, complete,
                                               req.addr, req.src_lane, req.is_write)))
        self._advance(cycle)
        self.outstanding += 1
        self.submitted += 1
        if self.outstanding > self.max_outstanding:
            self.max_outstanding = self.outstanding
        self.changes.append((cycle, self.outstanding))
        self._lane_change(req.src_lane, cycle, 1)
        req.issue_cycle = cycle
        self.completions.append((complete, nbytes, complete - cycle))
        return complete

    def next_completion(self) -> Optional[int]:
        return self.heap[0][0] if self.heap else None

    def tick(self, cycle: int) -> List[MemResponse]:
        """Pop every response completing at or before ``cycle`` in (cycle, req_id) order."""
        out = []
        heap = self.heap
        while heap and heap[0][0] <= cycle:
            complete, _, resp = heapq.heappop(heap)
            self._advance(complete)
            self.outstanding -= 1
            self.completed += 1
            self.changes.append((complete, self.outstanding))
            self._lane_change(resp.src_lane, complete, -1)
            if not resp.continuation & VALID_BIT:
                self.dropped_null += 1
            out.append(resp)
        return out

    # ----------------------------------------------------------- analysis
    def mean_outstanding(self, start: int, end: int) -> float:
        """Time-average of the node-wide outstanding gauge over [start, end)."""
        if end <= start:
            return 0.0
        ch = self.changes
        i = bisect_left(ch, (start, -1))
        # value in effect at `start`
        j = i
        while j < len(ch) and ch[j][0] == start:
            j += 1
        cur = ch[j - 1][1] if j > 0 else 0
        t = start
        area = 0
        for k in range(j, len(ch)):
            ct, val = ch[k]
            if ct >= end:
                break
            area += cur * (ct - t)
            t, cur = ct, val
        area += cur * (end - t)
        return area / (end - start)

    def window_traffic(self, start: int, end: int) -> Tuple[int, int, float]:
        """(bytes, requests, mean latency) of requests completing in [start, end)."""
        nbytes = 0
        count = 0
        lat = 0
        for complete, b, latency in self.completions:
            if start <= complete < end:
                nbytes += b
                count += 1
                lat += latency
        return nbytes, count, (lat / count if count else 0.0)

    @property
    def mean_latency(self) -> float:
        if not self.completions:
            return 0.0
        return sum(c[2] for c in self.completions) / len(self.completions)
