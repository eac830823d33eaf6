"""Two-pass assembler, static validator and disassembler."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .isa import (
    BRANCHES, MAX_EVENT_WORDS, NEW, NUM_GPRS, READ, SIGNATURES, SPECIAL_NAMES,
    TERMINATORS, WRITE, CodeLabel, EventHandler, EventLabel, Imm, Instruction,
    Keyword, Operand, ProgramImage, Reg, RegKind,
)


class AssemblyError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(where + message)


class ValidationError(AssemblyError):
    def __init__(self, diagnostics: List["Diagnostic"]):
        self.diagnostics = diagnostics
        first = diagnostics[0]
        super().__init__("; ".join(str(d) for d in diagnostics), first.line, 0)


@dataclass(frozen=True)
class Diagnostic:
    handler: str
    index: int  # instruction index within the handler body, -1 for handler-level
    rule: str
    line: int = 0

    def __str__(self):
        at = f"{self.handler}[{self.index}]" if self.index >= 0 else self.handler
        return f"{at}: {self.rule}"


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
_GPR = re.compile(r"X(\d+)$")
_OPR = re.compile(r"OB(\d+)$")


def _parse_reg(tok: str) -> Optional[Reg]:
    m = _GPR.match(tok)
    if m:
        return Reg(RegKind.GPR, int(m.group(1)))
    m = _OPR.match(tok)
    if m:
        return Reg(RegKind.OPERAND, int(m.group(1)))
    if tok in SPECIAL_NAMES:
        return Reg(RegKind.SPECIAL, SPECIAL_NAMES.index(tok))
    return None


def _parse_operand(tok: str, line: int, col: int) -> Operand:
    if _GPR.match(tok) or _OPR.match(tok):
        try:
            return _parse_reg(tok)
        except ValueError:
            raise AssemblyError(f"operand register out of range: {tok}", line, col) from None
    if tok in SPECIAL_NAMES:
        return _parse_reg(tok)
    if tok == "NEW":
        return NEW
    if tok == "R":
        return READ
    if tok == "W":
        return WRITE
    if tok.startswith("@"):
        if not _IDENT.match(tok[1:]):
            raise AssemblyError(f"bad event label {tok!r}", line, col)
        return EventLabel(tok[1:])
    if tok[:1].isdigit() or tok[:1] in "-+":
        try:
            return Imm(int(tok, 0))
        except ValueError:
            raise AssemblyError(f"bad immediate {tok!r}", line, col) from None
    if _IDENT.match(tok):
        return CodeLabel(tok)
    raise AssemblyError(f"cannot parse operand {tok!r}", line, col)


def _kind_ok(letter: str, op: Operand) -> bool:
    if letter == "d" or letter == "g":
        return isinstance(op, Reg) and op.kind is RegKind.GPR
    if letter == "r":
        return isinstance(op, Reg)
    if letter == "i":
        return isinstance(op, Imm)
    if letter == "l":
        return isinstance(op, CodeLabel)
    if letter == "e":
        return isinstance(op, EventLabel)
    if letter == "n":
        return op == NEW
    if letter == "m":
        return op in (READ, WRITE)
    raise AssertionError(letter)


_KIND_NAMES = {"d": "destination GPR", "g": "GPR", "r": "register", "i": "immediate",
               "l": "code label", "e": "event label", "n": "NEW", "m": "R or W"}


def check_signature(opcode: str, operands: Tuple[Operand, ...]) -> Optional[str]:
    """Return an error message if the operands don't fit the opcode's signature."""
    sig = SIGNATURES[opcode]
    if sig.endswith("*"):
        fixed = sig[:-1]
        extra = len(operands) - len(fixed)
        if extra < 1 or extra > MAX_EVENT_WORDS:
            return f"arity mismatch: {opcode} takes {len(fixed)} + 1..8 operands, got {len(operands)}"
        letters = fixed + "r" * extra
    else:
        if len(operands) != len(sig):
            return f"arity mismatch: {opcode} takes {len(sig)} operands, got {len(operands)}"
        letters = sig
    for pos, (letter, op) in enumerate(zip(letters, operands)):
        if not _kind_ok(letter, op):
            return f"operand {pos + 1} of {opcode} must be a {_KIND_NAMES[letter]}, got {op}"
    return None


def _split_operands(text: str, base_col: int) -> List[Tuple[str, int]]:
    out = []
    pos = 0
    for piece in text.split(","):
        stripped = piece.strip()
        lead = len(piece) - len(piece.lstrip())
        out.append((stripped, base_col + pos + lead))
        pos += len(piece) + 1
    return out


def assemble(source: str, check: bool = True) -> ProgramImage:
    """Assemble program text into a ProgramImage.

    Raises AssemblyError on syntax problems and ValidationError (a subclass)
    when ``check`` is set and the static checks of :func:`validate` fail.
    """
    lines = source.splitlines()
    events: List[str] = []
    seen_events = set()
    # pass 1: event declarations
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if text.startswith(".event"):
            rest = text[len(".event"):]
            if rest and not rest[0].isspace():
                raise AssemblyError(f"unknown directive {text.split()[0]!r}", lineno, 1)
            for name, col in _split_operands(rest, raw.index(".event") + 7):
                if not _IDENT.match(name):
                    raise AssemblyError(f"bad event label {name!r}", lineno, col)
                if name in seen_events:
                    raise AssemblyError(f"duplicate event label {name!r}", lineno, col)
                seen_events.add(name)
                events.append(name)
        elif text.startswith("."):
            raise AssemblyError(f"unknown directive {text.split()[0]!r}", lineno, 1)

    # pass 2: handler bodies
    bodies: Dict[str, List[Instruction]] = {}
    labels: Dict[str, Dict[str, int]] = {}
    label_lines: Dict[str, Dict[str, int]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0]
        stripped = text.strip()
        if not stripped or stripped.startswith("."):
            continue
        col0 = len(text) - len(text.lstrip()) + 1
        m = re.match(r"([A-Za-z_][A-Za-z0-9_.]*)\s*:", stripped)
        if m:
            name = m.group(1)
            if name in seen_events:
                if name in bodies:
                    raise AssemblyError(f"duplicate handler {name!r}", lineno, col0)
                current = name
                bodies[name] = []
                labels[name] = {}
                label_lines[name] = {}
            else:
                if current is None:
                    raise AssemblyError(f"code label {name!r} outside any handler", lineno, col0)
                if name in labels[current]:
                    raise AssemblyError(f"duplicate code label {name!r}", lineno, col0)
                labels[current][name] = len(bodies[current])
                label_lines[current][name] = lineno
            rest = stripped[m.end():]
            col0 += m.end() + (len(rest) - len(rest.lstrip()))
            stripped = rest.strip()
            if not stripped:
                continue
        if current is None:
            raise AssemblyError("instruction outside any handler", lineno, col0)
        parts = stripped.split(None, 1)
        opcode = parts[0].lower()
        if opcode not in SIGNATURES:
            raise AssemblyError(f"unknown mnemonic {parts[0]!r}", lineno, col0)
        operands: List[Operand] = []
        if len(parts) > 1:
            op_col = col0 + stripped.index(parts[1], len(parts[0]))
            for tok, col in _split_operands(parts[1], op_col):
                if not tok:
                    raise AssemblyError("empty operand", lineno, col)
                operands.append(_parse_operand(tok, lineno, col))
        ops = tuple(operands)
        err = check_signature(opcode, ops)
        if err:
            raise AssemblyError(err, lineno, col0)
        bodies[current].append(Instruction(opcode, ops, lineno))

    for name in events:
        if name not in bodies:
            raise AssemblyError(f"event label {name!r} declared without a handler")

    # label resolution
    for name, body in bodies.items():
        for ins in body:
            for op in ins.operands:
                if isinstance(op, CodeLabel) and op.name not in labels[name]:
                    raise AssemblyError(f"unresolved label {op.name!r}", ins.line, 1)
                if isinstance(op, EventLabel) and op.name not in seen_events:
                    raise AssemblyError(f"unresolved label @{op.name}", ins.line, 1)

    handlers = []
    offset = 0
    for eid, name in enumerate(events):
        body = tuple(bodies[name])
        lbls = tuple(sorted(labels[name].items(), key=lambda kv: (kv[1], kv[0])))
        handlers.append(EventHandler(name, eid, body, lbls, offset))
        offset += len(body)
    image = ProgramImage(tuple(handlers))
    if check:
        diags = validate(image)
        if diags:
            raise ValidationError(diags)
    return image


def _successors(h: EventHandler, i: int, index: Dict[str, int]) -> List[int]:
    ins = h.body[i]
    if ins.opcode in TERMINATORS:
        return []
    nxt = [i + 1]
    if ins.opcode in BRANCHES:
        target = index.get(ins.operands[2].name)
        if target is not None:
            nxt.append(target)
    return nxt


def validate(image: ProgramImage) -> List[Diagnostic]:
    """Static checks; returns an empty list when the image is well formed."""
    diags: List[Diagnostic] = []
    names = set()
    ids = set()
    for h in image.handlers:
        if h.name in names:
            diags.append(Diagnostic(h.name, -1, "duplicate handler label"))
        names.add(h.name)
        ids.add(h.event_id)
    if ids != set(range(len(image.handlers))):
        diags.append(Diagnostic("<image>", -1, "event ids are not dense"))

    for h in image.handlers:
        index = h.label_index()
        n = len(h.body)
        if n == 0:
            diags.append(Diagnostic(h.name, -1, "empty handler body"))
            continue
        for lname, pos in h.code_labels:
            if not 0 <= pos <= n:
                diags.append(Diagnostic(h.name, -1, f"code label {lname} out of range"))
        for i, ins in enumerate(h.body):
            err = check_signature(ins.opcode, ins.operands) if ins.opcode in SIGNATURES else \
                f"unknown mnemonic {ins.opcode}"
            if err:
                diags.append(Diagnostic(h.name, i, err, ins.line))
                continue
            diags.extend(_check_instruction(h, i, ins, index, names))
        # reachability: every reachable path must hit a terminator
        seen = set()
        stack = [0]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            if i >= n:
                diags.append(Diagnostic(h.name, n - 1, "control falls off the end of the handler without yield/yieldt",
                                        h.body[-1].line))
                continue
            if h.body[i].opcode in SIGNATURES and h.body[i].opcode not in TERMINATORS and \
                    check_signature(h.body[i].opcode, h.body[i].operands) is None:
                stack.extend(_successors(h, i, index))
    return diags


def _check_instruction(h, i, ins, index, names) -> List[Diagnostic]:
    out = []
    op = ins.opcode
    ops = ins.operands

    def bad(rule):
        out.append(Diagnostic(h.name, i, rule, ins.line))

    for o in ops:
        if isinstance(o, EventLabel) and o.name not in names:
            bad(f"unresolved event label @{o.name}")
        if isinstance(o, CodeLabel) and o.name not in index:
            bad(f"unresolved code label {o.name}")
    if op == "send":
        k = ops[2].value
        if not 0 <= k <= MAX_EVENT_WORDS:
            bad(f"send operand count {k} outside 0..8")
        elif ops[1].index + k > NUM_GPRS:
            bad("send register window runs past X15")
    elif op == "sendm":
        k = ops[2].value
        if not 1 <= k <= MAX_EVENT_WORDS:
            bad(f"sendm word count {k} outside 1..8")
        elif ops[3] == WRITE and ops[4].index + k > NUM_GPRS:
            bad("sendm write window runs past X15")
    elif op in ("movlr", "movrl"):
        if ops[2].value % 8:
            bad("scratchpad offset is not word aligned")
    elif op == "evii":
        if ops[1].value < 0:
            bad("negative lane id")
    return out


def disassemble(image: ProgramImage) -> str:
    """Render an image back to assembly text that re-assembles to an equal image."""
    names = [h.name for h in image.handlers]
    out = []
    for k in range(0, len(names), 8):
        out.append(".event " + ", ".join(names[k:k + 8]))
    for h in image.handlers:
        out.append("")
        out.append(f"{h.name}:")
        by_pos: Dict[int, List[str]] = {}
        for lname, pos in h.code_labels:
            by_pos.setdefault(pos, []).append(lname)
        for i, ins in enumerate(h.body):
            for lname in by_pos.get(i, ()):
                out.append(f"{lname}:")
            out.append(f"    {ins}")
        for lname in by_pos.get(len(h.body), ()):
            out.append(f"{lname}:")
    return "\n".join(out) + "\n"
