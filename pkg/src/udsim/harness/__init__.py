"""Ablation ladder, microbenchmarks, reports and the command-line interface."""

from .ablation import (
    AblationConfig, AblationReport, LADDER_NAMES, apply_ablation, contributions, ladder,
    run_ablation_suite,
)
from .bench import (
    OutstandingStats, SpawnPoint, StreamPoint, bench_bandwidth_ramp, bench_outstanding,
    bench_spawn, bench_stream,
)
from .config import RunSpec, load_config, spec_from_dict
from .report import emit_report, summary_text, write_table

__all__ = [
    "AblationConfig", "AblationReport", "LADDER_NAMES", "OutstandingStats", "RunSpec",
    "SpawnPoint", "StreamPoint", "apply_ablation", "bench_bandwidth_ramp", "bench_outstanding",
    "bench_spawn", "bench_stream", "contributions", "emit_report", "ladder", "load_config",
    "run_ablation_suite", "spec_from_dict", "summary_text", "write_table",
]
