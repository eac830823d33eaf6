"""Instruction set: register names, opcode signatures, and the program image.

The assembler and disassembler live in :mod:`udsim.asm`; this module only
holds the data model and the signature table both of them use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple, Union

NUM_GPRS = 16
NUM_OPERANDS = 8
NUM_SPECIALS = 8
MAX_EVENT_WORDS = 8
MASK64 = (1 << 64) - 1

SPECIAL_NAMES = ("NWID", "TID", "ELABEL", "ECONT", "EOPS", "ESRC", "CYCLE", "ZERO")


class RegKind(str, Enum):
    GPR = "X"
    OPERAND = "OB"
    SPECIAL = "SR"


@dataclass(frozen=True)
class Reg:
    kind: RegKind
    index: int

    def __post_init__(self):
        limit = {RegKind.GPR: NUM_GPRS, RegKind.OPERAND: NUM_OPERANDS,
                 RegKind.SPECIAL: NUM_SPECIALS}[self.kind]
        if not 0 <= self.index < limit:
            raise ValueError(f"register index out of range: {self.kind.value}{self.index}")

    @property
    def slot(self) -> int:
        """Index into a lane's flat 32-entry register file."""
        if self.kind is RegKind.GPR:
            return self.index
        if self.kind is RegKind.OPERAND:
            return NUM_GPRS + self.index
        return NUM_GPRS + NUM_OPERANDS + self.index

    def __str__(self):
        if self.kind is RegKind.SPECIAL:
            return SPECIAL_NAMES[self.index]
        return f"{self.kind.value}{self.index}"


def X(i: int) -> Reg:
    return Reg(RegKind.GPR, i)


def OB(i: int) -> Reg:
    return Reg(RegKind.OPERAND, i)


def SR(name: str) -> Reg:
    return Reg(RegKind.SPECIAL, SPECIAL_NAMES.index(name))


# flat register-file slots of the special registers
SR_NWID, SR_TID, SR_ELABEL, SR_ECONT, SR_EOPS, SR_ESRC, SR_CYCLE, SR_ZERO = range(24, 32)


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class CodeLabel:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class EventLabel:
    name: str

    def __str__(self):
        return "@" + self.name


@dataclass(frozen=True)
class Keyword:
    """Bare keywords: NEW (fresh thread binding), R and W (memory direction)."""
    word: str

    def __str__(self):
        return self.word


NEW = Keyword("NEW")
READ = Keyword("R")
WRITE = Keyword("W")

Operand = Union[Reg, Imm, CodeLabel, EventLabel, Keyword]

# Signature letters:
#   d destination GPR      r any register       g GPR (start of a register window)
#   i immediate            l code label         e event label
#   n the NEW keyword      m R|W                * 1..8 trailing registers
SIGNATURES: Dict[str, str] = {
    # core instruction set
    "yield": "", "yieldt": "",
    "ev": "drre", "evi": "drne", "evii": "dine",
    "send": "rgi", "sendr": "r*", "sendops": "r",
    "sendm": "rrimg", "sendmr": "rr*", "sendmops": "rr",
    "add": "drr", "sub": "drr", "and": "drr", "or": "drr",
    "beq": "rrl", "ble": "rrl", "bgt": "rrl",
    "movlr": "dri", "movrl": "rri", "bcpy": "rrr", "bcpyol": "r",
    "cstr": "drrrr", "cswp": "drrr",
    # immediate forms
    "addi": "dri", "subi": "dri", "andi": "dri", "ori": "dri", "movir": "di",
    # extensions
    "muli": "dri", "slli": "dri", "srli": "dri",
    "mul": "drr", "div": "drr", "mod": "drr",
    "fadd": "drr", "fmul": "drr", "fdiv": "drr", "fcvt": "dr",
}

CORE_MNEMONICS = (
    "yield", "yieldt", "ev", "evi", "evii", "send", "sendr", "sendops",
    "sendm", "sendmr", "sendmops", "add", "sub", "and", "or", "beq", "ble",
    "bgt", "movlr", "movrl", "bcpy", "bcpyol", "cstr", "cswp",
)
EXTENSION_MNEMONICS = tuple(m for m in SIGNATURES if m not in CORE_MNEMONICS)

BRANCHES = frozenset({"beq", "ble", "bgt"})
TERMINATORS = frozenset({"yield", "yieldt"})


@dataclass(frozen=True)
class Instruction:
    opcode: str
    operands: Tuple[Operand, ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self):
        if not self.operands:
            return self.opcode
        return f"{self.opcode} " + ", ".join(str(o) for o in self.operands)


@dataclass(frozen=True)
class EventHandler:
    name: str
    event_id: int
    body: Tuple[Instruction, ...]
    code_labels: Tuple[Tuple[str, int], ...] = ()  # (name, index into body), sorted by index
    entry_offset: int = 0

    def label_index(self) -> Dict[str, int]:
        return dict(self.code_labels)


@dataclass(frozen=True)
class ProgramImage:
    handlers: Tuple[EventHandler, ...]  # ordered by event id

    @property
    def label_table(self) -> Dict[str, int]:
        return {h.name: h.event_id for h in self.handlers}

    @property
    def code(self) -> List[Instruction]:
        out: List[Instruction] = []
        for h in self.handlers:
            out.extend(h.body)
        return out

    @property
    def source_map(self) -> List[int]:
        return [ins.line for ins in self.code]

    def handler(self, name: str) -> EventHandler:
        for h in self.handlers:
            if h.name == name:
                return h
        raise KeyError(name)

    def event_id(self, name: str) -> int:
        return self.handler(name).event_id

    def to_dict(self) -> dict:
        return {
            "handlers": [
                {
                    "name": h.name,
                    "id": h.event_id,
                    "entry": h.entry_offset,
                    "labels": [list(x) for x in h.code_labels],
                    "body": [str(ins) for ins in h.body],
                }
                for h in self.handlers
            ]
        }

    def serialize(self) -> bytes:
        """Canonical byte form; identical programs give identical bytes."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def mnemonics(self) -> List[str]:
        return sorted({ins.opcode for ins in self.code})
