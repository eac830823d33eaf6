"""Cycle-approximate simulator of an event-driven graph accelerator node."""

from .asm import AssemblyError, Diagnostic, ValidationError, assemble, disassemble, validate
from .fabric import (
    BootEvent, ConfigError, Halt, Node, NodeConfig, ResultField, SimResult, host_collect, run,
)
from .isa import ProgramImage
from .lane import Event, EventWord, MemRequest, SimFault, pack_evword
from .memory import DramImage, MemorySystem, MemoryTiming
from .stats import SimStats

__all__ = [
    "AssemblyError", "BootEvent", "ConfigError", "Diagnostic", "DramImage", "Event", "EventWord",
    "Halt", "MemRequest", "MemorySystem", "MemoryTiming", "Node", "NodeConfig", "ProgramImage",
    "ResultField", "SimFault", "SimResult", "SimStats", "ValidationError", "assemble",
    "disassemble", "host_collect", "pack_evword", "run", "validate",
]
