"""Memory-bandwidth, memory-parallelism and spawn-rate microbenchmarks."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence

from ..fabric import BootEvent, Node, NodeConfig, SimResult
from ..kernels.micro import CHUNK, spawn_program, stream_program
from ..memory import DramImage

STREAM_BASE = 1 << 20
WINDOW = (0.1, 0.9)


@dataclass
class StreamPoint:
    transfer_words: int
    threads: int
    lanes: int
    accelerators: int
    stacks: int
    cycles: int
    bandwidth_gbps: float  # steady-state window
    outstanding_mean: float
    latency_mean: float
    little_gbps: float  # outstanding * request bytes / latency

    @property
    def little_error(self) -> float:
        return abs(self.little_gbps - self.bandwidth_gbps) / self.bandwidth_gbps if self.bandwidth_gbps else 0.0

    def row(self) -> Dict[str, object]:
        d = asdict(self)
        d["little_error"] = self.little_error
        return d


def _stream_node(node: NodeConfig, transfer_words: int, threads: int, lanes: int,
                 accelerators: int, requests: int):
    if lanes > node.lanes_per_accelerator:
        raise ValueError(f"{lanes} lanes exceed {node.lanes_per_accelerator} per accelerator")
    if accelerators > node.accelerators:
        raise ValueError(f"{accelerators} accelerators exceed the node's {node.accelerators}")
    if requests % CHUNK:
        requests = -(-requests // CHUNK) * CHUNK
    step = 8 * transfer_words
    span = requests * step
    span = -(-span // 64) * 64
    boot = []
    k = 0
    for a in range(accelerators):
        for l in range(lanes):
            lane = a * node.lanes_per_accelerator + l
            for _ in range(threads):
                start = STREAM_BASE + k * span
                boot.append(BootEvent(lane, "stream_start", (start, start + requests * step, requests)))
                k += 1
    dram = DramImage(max(node.dram_bytes, STREAM_BASE + k * span))
    n = Node(node, stream_program(transfer_words), dram)
    n.inject(boot)
    return n


def bench_stream(node: NodeConfig, transfer_words: int = 8, threads: int = 1, lanes: int = 1,
                 accelerators: int = 1, requests: int = 512) -> StreamPoint:
    """One streaming-read run; statistics over the [10%, 90%] window of its runtime."""
    n = _stream_node(node, transfer_words, threads, lanes, accelerators, requests)
    res = n.run()
    if not res.ok:
        raise RuntimeError(f"stream benchmark halted with {res.halted.value}: {res.fault}")
    total = res.final_cycle
    start, end = int(total * WINDOW[0]), int(total * WINDOW[1])
    mem = n.memory
    nbytes, count, lat = mem.window_traffic(start, end)
    seconds = (end - start) / node.clock_hz
    bw = nbytes / seconds / 1e9 if seconds else 0.0
    outstanding = mem.mean_outstanding(start, end)
    req_bytes = 8 * transfer_words
    little = outstanding * req_bytes / (lat / node.clock_hz) / 1e9 if lat else 0.0
    return StreamPoint(transfer_words, threads, lanes, accelerators, node.stacks, total, bw,
                       outstanding, lat, little)


def bench_bandwidth_ramp(node: NodeConfig, transfer_sizes: Sequence[int] = (8,),
                         threads: Sequence[int] = (1,), lanes: Sequence[int] = (1,),
                         accelerators: Sequence[int] = (1,), stacks: Sequence[Optional[int]] = (None,),
                         requests: int = 512) -> List[StreamPoint]:
    """Cartesian sweep of stream runs, one row per parameter point."""
    out = []
    for tw, th, ln, acc, st in product(transfer_sizes, threads, lanes, accelerators, stacks):
        cfg = node if st is None else node.with_(stacks=st)
        out.append(bench_stream(cfg, tw, th, ln, acc, requests))
    return out


@dataclass
class OutstandingStats:
    mean: float
    max: int
    per_lane_mean: Dict[int, float]
    per_lane_max: Dict[int, int]
    samples: List[tuple]


def bench_outstanding(result: SimResult) -> OutstandingStats:
    """Outstanding-request statistics of a finished run."""
    s = result.stats
    return OutstandingStats(s.outstanding_mean, s.outstanding_max, dict(s.lane_outstanding_mean),
                            dict(s.lane_outstanding_max), list(s.outstanding_samples))


@dataclass
class SpawnPoint:
    threads: int
    cycles: int
    issue_cycles_per_thread: float  # spawning lane's loop
    create_cycles_per_thread: float  # spacing of thread creations on the target lane
    threads_per_second: float


def bench_spawn(node: NodeConfig, threads: int = 1000, src_lane: int = 0,
                dst_lane: Optional[int] = None) -> SpawnPoint:
    """One lane creates ``threads`` threads on a neighbor lane as fast as it can."""
    if node.n_lanes < 2 and dst_lane is None:
        dst_lane = src_lane
    dst = dst_lane if dst_lane is not None else (src_lane + 1) % node.n_lanes
    n = Node(node, spawn_program(), DramImage(1 << 20))
    target = n.lanes[dst]
    target.spawn_log = []
    n.inject([BootEvent(src_lane, "spawn_start", (dst, threads))])
    res = n.run()
    if not res.ok:
        raise RuntimeError(f"spawn benchmark halted with {res.halted.value}: {res.fault}")
    log = [c for c in target.spawn_log]
    if dst == src_lane:
        log = log[1:]
    created = len(log)
    create = (log[-1] - log[0]) / (created - 1) if created > 1 else 0.0
    src = n.lanes[src_lane]
    issue = (src.busy_cycles - 4) / threads if dst != src_lane else create
    return SpawnPoint(threads, res.final_cycle, issue, create,
                      node.clock_hz / create if create else 0.0)
