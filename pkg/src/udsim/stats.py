"""Run statistics gathered from lanes and the memory system after a run."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple


@dataclass
class SimStats:
    total_cycles: int
    clock_hz: float
    lane_busy_cycles: List[int]
    lane_invocations: List[int]
    lane_threads: List[int]
    lane_penalty_cycles: List[int]
    threads_created: int
    threads_finished: int
    invocations: int
    inst_hist: Dict[int, int]
    mem_hist: Dict[int, int]
    label_counts: Dict[str, int]
    bytes_read: int
    bytes_written: int
    mem_requests: int
    dropped_null_responses: int
    outstanding_samples: List[Tuple[int, int]]
    outstanding_mean: float
    outstanding_max: int
    lane_outstanding_mean: Dict[int, float]
    lane_outstanding_max: Dict[int, int]
    mean_latency: float
    events_sent: int
    events_delivered: int
    queue_max: int
    high_water_events: int
    lifetime_sum: int
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def runtime_s(self) -> float:
        return self.total_cycles / self.clock_hz

    @property
    def n_lanes(self) -> int:
        return len(self.lane_busy_cycles)

    @property
    def lane_utilization(self) -> List[float]:
        t = max(self.total_cycles, 1)
        return [b / t for b in self.lane_busy_cycles]

    @property
    def utilization_spread(self) -> float:
        u = self.lane_utilization
        return max(u) - min(u) if u else 0.0

    @property
    def mean_utilization(self) -> float:
        u = self.lane_utilization
        return sum(u) / len(u) if u else 0.0

    @property
    def traffic_bytes(self) -> int:
        return self.bytes_read + self.bytes_written

    @property
    def bandwidth_gbps(self) -> float:
        if not self.total_cycles:
            return 0.0
        return self.traffic_bytes / self.runtime_s / 1e9

    @property
    def instructions(self) -> int:
        return sum(self.lane_busy_cycles)

    @property
    def mean_instructions_per_invocation(self) -> float:
        n = sum(self.inst_hist.values())
        if not n:
            return 0.0
        return sum(k * v for k, v in self.inst_hist.items()) / n

    @property
    def mean_thread_lifetime(self) -> float:
        return self.lifetime_sum / self.threads_finished if self.threads_finished else 0.0

    def summary(self) -> Dict[str, object]:
        return {
            "total_cycles": self.total_cycles,
            "runtime_s": self.runtime_s,
            "lanes": self.n_lanes,
            "threads_created": self.threads_created,
            "invocations": self.invocations,
            "instructions": self.instructions,
            "mean_instructions_per_invocation": self.mean_instructions_per_invocation,
            "mean_utilization": self.mean_utilization,
            "utilization_spread": self.utilization_spread,
            "bytes_read": self.bytes_read,
            "bytes_written": self.bytes_written,
            "bandwidth_gbps": self.bandwidth_gbps,
            "mem_requests": self.mem_requests,
            "outstanding_mean": self.outstanding_mean,
            "outstanding_max": self.outstanding_max,
            "mean_latency_cycles": self.mean_latency,
            "events_sent": self.events_sent,
            "dropped_null_responses": self.dropped_null_responses,
            "queue_max": self.queue_max,
            "high_water_events": self.high_water_events,
        }


def collect_stats(node, final_cycle: int) -> SimStats:
    lanes = node.lanes
    mem = node.memory
    mem.finalize(final_cycle)
    inst: Dict[int, int] = {}
    memh: Dict[int, int] = {}
    labels: Dict[str, int] = {}
    names = [h.name for h in node.program.handlers]
    for ln in lanes:
        for k, v in ln.inst_hist.items():
            inst[k] = inst.get(k, 0) + v
        for k, v in ln.mem_hist.items():
            memh[k] = memh.get(k, 0) + v
        for k, v in ln.label_counts.items():
            labels[names[k]] = labels.get(names[k], 0) + v
    t = max(final_cycle, 1)
    return SimStats(
        total_cycles=final_cycle,
        clock_hz=node.config.clock_hz,
        lane_busy_cycles=[ln.busy_cycles for ln in lanes],
        lane_invocations=[ln.invocations for ln in lanes],
        lane_threads=[ln.threads_created for ln in lanes],
        lane_penalty_cycles=[ln.penalty_cycles for ln in lanes],
        threads_created=sum(ln.threads_created for ln in lanes),
        threads_finished=sum(ln.threads_finished for ln in lanes),
        invocations=sum(ln.invocations for ln in lanes),
        inst_hist=dict(sorted(inst.items())),
        mem_hist=dict(sorted(memh.items())),
        label_counts=dict(sorted(labels.items())),
        bytes_read=mem.bytes_read,
        bytes_written=mem.bytes_written,
        mem_requests=mem.submitted,
        dropped_null_responses=mem.dropped_null,
        outstanding_samples=list(mem.samples),
        outstanding_mean=mem.area / t,
        outstanding_max=mem.max_outstanding,
        lane_outstanding_mean={k: v / t for k, v in sorted(mem.lane_area.items()) if k >= 0},
        lane_outstanding_max={k: v for k, v in sorted(mem.lane_max.items()) if k >= 0},
        mean_latency=mem.mean_latency,
        events_sent=node.sent,
        events_delivered=node.delivered,
        queue_max=max((ln.queue_max for ln in lanes), default=0),
        high_water_events=sum(ln.high_water_events for ln in lanes),
        lifetime_sum=sum(ln.lifetime_sum for ln in lanes),
    )
