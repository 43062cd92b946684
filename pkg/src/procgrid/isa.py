"""Leaf-process instruction set: parsing, formatting, and static checks.

Programs run on 16 general registers of 32 bits. Every instruction issues in
one cycle; PUT/GET may additionally put the element to sleep until the port
condition clears. Shift amounts are masked to 5 bits, arithmetic wraps mod
2^32, and CMPLT compares the unsigned 32-bit patterns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

NUM_REGS = 16
WORD_MASK = 0xFFFFFFFF

# instruction memory capacity per element class
CLASS_LIMITS = {"STAN": 256, "CTRL": 1024, "MEM": 512}

ALU_OPS = ("ADD", "SUB", "MUL", "AND", "OR", "XOR", "SHL", "SHR", "CMPEQ", "CMPLT")

# mnemonic -> operand shape
_SHAPES = {
    "CONST": ("reg", "imm"),
    "MOV": ("reg", "reg"),
    "BR": ("label",),
    "BRZ": ("reg", "label"),
    "PUT": ("reg", "port"),
    "GET": ("reg", "port"),
    "NOP": (),
    "HALT": (),
}
for _op in ALU_OPS:
    _SHAPES[_op] = ("reg", "reg", "reg")

_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*):(.*)$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Instr:
    op: str
    args: tuple = ()

    def __str__(self) -> str:
        return format_instr(self)


@dataclass(frozen=True)
class Program:
    """Instruction sequence plus labels in source order."""

    instrs: tuple[Instr, ...]
    labels: tuple[tuple[str, int], ...] = ()

    def label_map(self) -> dict[str, int]:
        return dict(self.labels)

    def __len__(self) -> int:
        return len(self.instrs)


def _parse_operand(text: str, shape: str, line: int) -> object:
    text = text.strip()
    if shape == "reg":
        if not re.fullmatch(r"r\d+", text):
            raise ParseError(f"expected register, got '{text}'", line, 1)
        n = int(text[1:])
        if n >= NUM_REGS:
            raise ParseError(f"register r{n} out of range (r0..r{NUM_REGS - 1})", line, 1)
        return n
    if shape == "imm":
        try:
            value = int(text, 0)
        except ValueError:
            raise ParseError(f"expected immediate, got '{text}'", line, 1) from None
        return value
    # label / port
    if not _IDENT_RE.match(text):
        raise ParseError(f"expected {shape} name, got '{text}'", line, 1)
    return text


def parse_instr(text: str, line: int = 0) -> Instr:
    """Parse one instruction (no label prefix)."""
    head, _, rest = text.strip().partition(" ")
    op = head.strip()
    if op not in _SHAPES:
        raise ParseError(f"unknown instruction '{op}'", line, 1)
    shape = _SHAPES[op]
    parts = [p for p in rest.split(",")] if rest.strip() else []
    if len(parts) != len(shape):
        raise ParseError(
            f"{op} takes {len(shape)} operand(s), got {len(parts)}", line, 1
        )
    args = tuple(_parse_operand(p, s, line) for p, s in zip(parts, shape))
    return Instr(op, args)


def parse_program(lines: list[tuple[int, str]]) -> Program:
    """Assemble (line_number, text) pairs into a Program.

    Labels may stand alone (`loop:`) or prefix an instruction on the same
    line. Label resolution to indices happens here; semantic checks (targets
    defined, size limits) happen in the netlist type checker.
    """
    instrs: list[Instr] = []
    labels: list[tuple[str, int]] = []
    for lineno, raw in lines:
        text = raw.strip()
        if not text:
            continue
        m = _LABEL_RE.match(text)
        if m and m.group(1) not in _SHAPES:
            labels.append((m.group(1), len(instrs)))
            text = m.group(2).strip()
            if not text:
                continue
        instrs.append(parse_instr(text, lineno))
    return Program(tuple(instrs), tuple(labels))


def format_instr(instr: Instr) -> str:
    shape = _SHAPES[instr.op]
    rendered = []
    for arg, s in zip(instr.args, shape):
        if s == "reg":
            rendered.append(f"r{arg}")
        elif s == "imm":
            rendered.append(str(arg))
        else:
            rendered.append(str(arg))
    if not rendered:
        return instr.op
    return f"{instr.op} " + ", ".join(rendered)


def format_program(program: Program, indent: str = "") -> list[str]:
    """Render a program as text lines, labels on their own lines."""
    by_index: dict[int, list[str]] = {}
    for name, idx in program.labels:
        by_index.setdefault(idx, []).append(name)
    out: list[str] = []
    for i, instr in enumerate(program.instrs):
        for name in by_index.get(i, ()):
            out.append(f"{indent}{name}:")
        out.append(f"{indent}  {format_instr(instr)}")
    # trailing labels (pointing one past the last instruction)
    for name in by_index.get(len(program.instrs), ()):
        out.append(f"{indent}{name}:")
    return out


def check_program(program: Program, ae_class: str, in_ports: set[str], out_ports: set[str]) -> list[str]:
    """Static validity: label targets, port directions, size, immediates.

    Returns human-readable problem strings (empty list when clean).
    """
    problems: list[str] = []
    limit = CLASS_LIMITS[ae_class]
    if len(program.instrs) > limit:
        problems.append(
            f"program has {len(program.instrs)} instructions, "
            f"exceeds {ae_class} limit of {limit}"
        )
    label_map: dict[str, int] = {}
    for name, idx in program.labels:
        if name in label_map and label_map[name] != idx:
            problems.append(f"label '{name}' defined more than once")
        label_map[name] = idx
    for i, instr in enumerate(program.instrs):
        if instr.op == "CONST":
            imm = instr.args[1]
            if not (-(2**31) <= imm < 2**32):
                problems.append(f"instr {i}: immediate {imm} outside 32-bit range")
        elif instr.op in ("BR", "BRZ"):
            target = instr.args[-1]
            if target not in label_map:
                problems.append(f"instr {i}: undefined label '{target}'")
            elif label_map[target] >= len(program.instrs):
                problems.append(f"instr {i}: label '{target}' points past program end")
        elif instr.op == "PUT":
            port = instr.args[1]
            if port not in out_ports:
                problems.append(f"instr {i}: PUT to '{port}' which is not an out port")
        elif instr.op == "GET":
            port = instr.args[1]
            if port not in in_ports:
                problems.append(f"instr {i}: GET from '{port}' which is not an in port")
    return problems
