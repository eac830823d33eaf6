"""CSV and summary emission.  Output is byte-stable for identical inputs."""

from __future__ import annotations

import csv
import io
import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from ..stats import SimStats


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())


def write_dict_rows(path: str, rows: List[Mapping[str, object]]) -> None:
    if not rows:
        write_table(path, [], [])
        return
    header = list(rows[0].keys())
    write_table(path, header, ([r[k] for k in header] for r in rows))


def summary_text(stats: Optional[SimStats], results: Mapping[str, object] = None,
                 extra: Mapping[str, object] = None) -> str:
    lines = []
    for k, v in (results or {}).items():
        lines.append(f"{k}={_fmt(v)}")
    if stats is not None:
        for k, v in stats.summary().items():
            lines.append(f"{k}={_fmt(v)}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={_fmt(v)}")
    return "\n".join(lines) + "\n"


def emit_report(stats: SimStats, outdir: str, results: Mapping[str, object] = None,
                extra: Mapping[str, object] = None) -> Dict[str, str]:
    """Write per-lane, histogram, label, time-series CSVs and summary.txt into outdir."""
    os.makedirs(outdir, exist_ok=True)
    files = {}

    def path(name):
        files[name] = os.path.join(outdir, name)
        return files[name]

    util = stats.lane_utilization
    write_table(path("lanes.csv"),
                ["lane", "busy_cycles", "utilization", "invocations", "threads_created",
                 "penalty_cycles", "outstanding_mean", "outstanding_max"],
                ([i, stats.lane_busy_cycles[i], util[i], stats.lane_invocations[i],
                  stats.lane_threads[i], stats.lane_penalty_cycles[i],
                  stats.lane_outstanding_mean.get(i, 0.0), stats.lane_outstanding_max.get(i, 0)]
                 for i in range(stats.n_lanes)))
    write_table(path("inst_hist.csv"), ["instructions", "invocations"], stats.inst_hist.items())
    write_table(path("mem_hist.csv"), ["dram_requests", "invocations"], stats.mem_hist.items())
    write_table(path("labels.csv"), ["label", "invocations"], stats.label_counts.items())
    write_table(path("outstanding.csv"), ["cycle", "outstanding"], stats.outstanding_samples)
    with open(path("summary.txt"), "w", encoding="utf-8", newline="") as f:
        f.write(summary_text(stats, results, extra))
    return files
