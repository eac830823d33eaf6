"""Mechanism ablation ladder: PE -> +SoM -> +LWT -> +UST -> full."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from ..fabric import ConfigError, NodeConfig, SimResult, run
from ..memory import DramImage

OPERAND_PENALTY = 2
DISPATCH_PENALTY = 50

_LADDER = (
    ("PE", (False, False, False, False)),
    ("+SoM", (True, False, False, False)),
    ("+LWT", (True, True, False, False)),
    ("+UST", (True, True, True, False)),
    ("full", (True, True, True, True)),
)
LADDER_NAMES = tuple(name for name, _ in _LADDER)
MECHANISMS = ("SoM", "LWT", "UST", "EDS")


@dataclass(frozen=True)
class AblationConfig:
    som: bool = True
    lwt: bool = True
    ust: bool = True
    eds: bool = True

    def __post_init__(self):
        flags = (self.som, self.lwt, self.ust, self.eds)
        if flags not in [f for _, f in _LADDER]:
            raise ConfigError(f"illegal ablation point som={self.som} lwt={self.lwt} "
                              f"ust={self.ust} eds={self.eds}; mechanisms are added in the "
                              f"order {' -> '.join(LADDER_NAMES)}")

    @classmethod
    def point(cls, name: str) -> "AblationConfig":
        for n, flags in _LADDER:
            if n.lower() == name.lower() or n.lstrip("+").lower() == name.lower():
                return cls(*flags)
        raise ConfigError(f"unknown ablation point {name!r}; choose from {', '.join(LADDER_NAMES)}")

    @property
    def name(self) -> str:
        flags = (self.som, self.lwt, self.ust, self.eds)
        return next(n for n, f in _LADDER if f == flags)


def ladder() -> List[AblationConfig]:
    return [AblationConfig(*flags) for _, flags in _LADDER]


def apply_ablation(ab: AblationConfig, node: NodeConfig, operand_penalty: int = OPERAND_PENALTY,
                   dispatch_penalty: int = DISPATCH_PENALTY) -> NodeConfig:
    return node.with_(
        split_transaction=ab.som,
        contexts_per_lane=node.contexts_per_lane if ab.lwt else 1,
        operand_penalty=0 if ab.ust else operand_penalty,
        dispatch_penalty=0 if ab.eds else dispatch_penalty,
    )


@dataclass
class AblationRow:
    point: str
    cycles: int
    speedup: float  # vs PE
    result: object
    ok: bool


@dataclass
class AblationReport:
    rows: List[AblationRow]
    contributions: Dict[str, float]

    @property
    def runtimes(self) -> List[int]:
        return [r.cycles for r in self.rows]

    @property
    def strictly_monotone(self) -> bool:
        c = self.runtimes
        return all(a > b for a, b in zip(c, c[1:]))

    @property
    def total_speedup(self) -> float:
        return self.rows[-1].speedup if self.rows else 1.0


def contributions(cycles: List[int]) -> Dict[str, float]:
    """Share of log-speedup gained at each ladder step, normalized to sum to 1."""
    steps = [math.log(a / b) if a > 0 and b > 0 else 0.0 for a, b in zip(cycles, cycles[1:])]
    total = sum(steps)
    if total <= 0:
        return {m: 0.0 for m in MECHANISMS}
    return {m: s / total for m, s in zip(MECHANISMS, steps)}


def run_ablation_suite(bundle, node: NodeConfig, operand_penalty: int = OPERAND_PENALTY,
                       dispatch_penalty: int = DISPATCH_PENALTY,
                       on_result: Optional[Callable[[str, SimResult], None]] = None) -> AblationReport:
    """Run a kernel bundle at all five ladder points."""
    rows = []
    base = None
    for ab in ladder():
        cfg = apply_ablation(ab, node, operand_penalty, dispatch_penalty)
        dram = DramImage(node.dram_bytes)
        bundle.prepare(dram)
        res = run(cfg, bundle.program, dram, bundle.boot, bundle.scratch_init)
        value = bundle.collect(dram) if res.ok else None
        if on_result:
            on_result(ab.name, res)
        base = base or res.final_cycle
        rows.append(AblationRow(ab.name, res.final_cycle, base / max(res.final_cycle, 1), value, res.ok))
    return AblationReport(rows, contributions([r.cycles for r in rows]))
