"""Stable textual form of the IR.

Layout::

    program main

    func binarySearch(%0: arr, %1: int) -> int {
      regs %2: int, %3: bool
      entry b0
    block b0:
      %2 = const 0
      br %3, b1, b2 !opaque
    ...
      trap b1 0 4 -> b5 [IndexOutOfBounds, NullAccess]
    }

Instruction tags other than ``original`` are appended as ``!tag``.
"""
from __future__ import annotations

import json
import re

from .model import (
    BINARY_OPS, TRAP_KINDS, UNARY_OPS, Block, Function, Instr, Program, TrapEntry,
)


class IRTextError(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


def _r(x: int) -> str:
    return f"%{x}"


def format_instr(ins: Instr) -> str:
    op, a = ins.op, ins.args
    lhs = f"{_r(ins.dst)} = " if ins.dst is not None else ""
    if op == "const":
        body = f"const {a[0]}"
    elif op == "null" or op == "catch":
        body = op
    elif op == "arrlit":
        body = "arrlit [" + ", ".join(str(v) for v in a[0]) + "]"
    elif op == "call":
        body = f"call {a[0]}(" + ", ".join(_r(x) for x in a[1]) + ")"
    elif op == "print_str":
        body = f"print_str {json.dumps(a[0])}"
    elif op == "jmp":
        body = f"jmp b{a[0]}"
    elif op == "br":
        body = f"br {_r(a[0])}, b{a[1]}, b{a[2]}"
    elif op == "switch":
        cases = ", ".join(f"{k}: b{t}" for k, t in a[1])
        body = f"switch {_r(a[0])} [{cases}] default b{a[2]}"
    elif op == "ret":
        body = "ret" + (f" {_r(a[0])}" if a else "")
    else:
        body = op + " " + ", ".join(_r(x) for x in a)
    if ins.tag != "original":
        body += f" !{ins.tag}"
    return lhs + body


def emit_function(fn: Function) -> str:
    lines = []
    params = ", ".join(f"{_r(p)}: {fn.reg_types[p]}" for p in fn.params)
    lines.append(f"func {fn.name}({params}) -> {fn.ret_type} {{")
    others = [r for r in range(len(fn.reg_types)) if r not in set(fn.params)]
    lines.append("  regs " + ", ".join(f"{_r(r)}: {fn.reg_types[r]}" for r in others))
    lines.append(f"  entry b{fn.entry}")
    for b in fn.blocks:
        lines.append(f"block b{b.id}:")
        for ins in b.instrs:
            lines.append("  " + format_instr(ins))
        lines.append("  " + format_instr(b.term))
    for t in fn.traps:
        kinds = ", ".join(sorted(t.kinds))
        lines.append(f"  trap b{t.block} {t.start} {t.end} -> b{t.handler} [{kinds}]")
    lines.append("}")
    return "\n".join(lines)


def emit_text(program: Program) -> str:
    parts = [f"program {program.entry}"]
    parts.extend(emit_function(f) for f in program.functions)
    return "\n\n".join(parts) + "\n"


# -- parsing ---------------------------------------------------------------

_REG = r"%(\d+)"
_BLK = r"b(\d+)"
_FUNC_RE = re.compile(r"^func\s+([A-Za-z_]\w*)\((.*)\)\s*->\s*(\w+)\s*\{$")
_TRAP_RE = re.compile(rf"^trap\s+{_BLK}\s+(\d+)\s+(\d+)\s*->\s*{_BLK}\s*\[(.*)\]$")


def _reg(tok: str, line: int) -> int:
    m = re.fullmatch(_REG, tok.strip())
    if not m:
        raise IRTextError(line, f"expected register, got {tok.strip()!r}")
    return int(m.group(1))


def _blk(tok: str, line: int) -> int:
    m = re.fullmatch(_BLK, tok.strip())
    if not m:
        raise IRTextError(line, f"expected block label, got {tok.strip()!r}")
    return int(m.group(1))


def _split(s: str) -> list[str]:
    return [p.strip() for p in s.split(",")] if s.strip() else []


def parse_instr(text: str, line: int = 0) -> Instr:
    tag = "original"
    cut = text.rfind(" !")
    if cut >= 0 and '"' not in text[cut:] and re.fullmatch(r"\w+", text[cut + 2:].strip()):
        text, tag = text[:cut], text[cut + 2:].strip()
    dst = None
    if "=" in text.split('"')[0] and text.lstrip().startswith("%"):
        lhs, text = text.split("=", 1)
        dst = _reg(lhs, line)
    text = text.strip()
    op, _, rest = text.partition(" ")
    rest = rest.strip()
    if op == "const":
        try:
            args: tuple = (int(rest),)
        except ValueError:
            raise IRTextError(line, f"bad constant {rest!r}") from None
    elif op in ("null", "catch"):
        args = ()
    elif op == "arrlit":
        if not (rest.startswith("[") and rest.endswith("]")):
            raise IRTextError(line, "bad array literal")
        try:
            args = (tuple(int(v) for v in _split(rest[1:-1])),)
        except ValueError:
            raise IRTextError(line, "bad array literal") from None
    elif op == "call":
        m2 = re.fullmatch(r"([A-Za-z_]\w*)\((.*)\)", rest)
        if not m2:
            raise IRTextError(line, "bad call")
        args = (m2.group(1), tuple(_reg(t, line) for t in _split(m2.group(2))))
    elif op == "print_str":
        try:
            s = json.loads(rest)
        except json.JSONDecodeError:
            raise IRTextError(line, "bad string literal") from None
        if not isinstance(s, str):
            raise IRTextError(line, "bad string literal")
        args = (s,)
    elif op == "jmp":
        args = (_blk(rest, line),)
    elif op == "br":
        parts = _split(rest)
        if len(parts) != 3:
            raise IRTextError(line, "br takes 3 operands")
        args = (_reg(parts[0], line), _blk(parts[1], line), _blk(parts[2], line))
    elif op == "switch":
        m2 = re.fullmatch(rf"{_REG}\s*\[(.*)\]\s*default\s+{_BLK}", rest)
        if not m2:
            raise IRTextError(line, "bad switch")
        cases = []
        for c in _split(m2.group(2)):
            k, _, t = c.partition(":")
            try:
                cases.append((int(k), _blk(t, line)))
            except ValueError:
                raise IRTextError(line, "bad switch case") from None
        args = (int(m2.group(1)), tuple(cases), int(m2.group(3)))
    elif op == "ret":
        args = (_reg(rest, line),) if rest else ()
    elif op in BINARY_OPS or op in UNARY_OPS or op in ("load", "store", "print", "throw"):
        args = tuple(_reg(t, line) for t in _split(rest))
    else:
        raise IRTextError(line, f"unknown opcode {op!r}")
    return Instr(op, dst, args, tag)


def parse_text(text: str) -> Program:
    lines = text.splitlines()
    entry = None
    functions: list[Function] = []
    i = 0
    n = len(lines)
    while i < n:
        raw = lines[i].strip()
        i += 1
        if not raw or raw.startswith("#"):
            continue
        if raw.startswith("program "):
            entry = raw.split(None, 1)[1].strip()
            continue
        m = _FUNC_RE.match(raw)
        if not m:
            raise IRTextError(i, f"expected function header, got {raw!r}")
        fn, i = _parse_function(m, lines, i)
        functions.append(fn)
    if entry is None:
        raise IRTextError(1, "missing 'program' header")
    return Program(functions, entry)


def _parse_function(m: re.Match, lines: list[str], i: int) -> tuple[Function, int]:
    name, params_s, ret_type = m.group(1), m.group(2), m.group(3)
    reg_types: dict[int, str] = {}
    params = []
    for p in _split(params_s):
        r, _, t = p.partition(":")
        reg = _reg(r, i)
        reg_types[reg] = t.strip()
        params.append(reg)
    blocks: list[Block] = []
    traps: list[TrapEntry] = []
    entry_block = None
    cur_id = None
    cur: list[Instr] = []

    def close(line: int) -> None:
        nonlocal cur_id, cur
        if cur_id is None:
            return
        if not cur:
            raise IRTextError(line, f"empty block b{cur_id}")
        blocks.append(Block(cur_id, cur[:-1], cur[-1]))
        cur_id, cur = None, []

    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        if raw == "}":
            close(i)
            if entry_block is None:
                raise IRTextError(i, "missing entry declaration")
            nregs = max(reg_types, default=-1) + 1
            if sorted(reg_types) != list(range(nregs)):
                raise IRTextError(i, "register numbering has gaps")
            fn = Function(name, params, ret_type, [reg_types[r] for r in range(nregs)],
                          blocks, entry_block, traps)
            return fn, i
        if raw.startswith("regs"):
            for p in _split(raw[4:]):
                r, _, t = p.partition(":")
                reg_types[_reg(r, i)] = t.strip()
        elif raw.startswith("entry "):
            entry_block = _blk(raw[6:], i)
        elif raw.startswith("block "):
            close(i)
            if not raw.endswith(":"):
                raise IRTextError(i, "block header must end with ':'")
            cur_id = _blk(raw[6:-1], i)
        elif raw.startswith("trap "):
            close(i)
            mt = _TRAP_RE.match(raw)
            if not mt:
                raise IRTextError(i, "bad trap entry")
            kinds = frozenset(k.strip() for k in mt.group(5).split(",") if k.strip())
            for k in kinds:
                if k not in TRAP_KINDS:
                    raise IRTextError(i, f"unknown trap kind {k!r}")
            traps.append(TrapEntry(int(mt.group(1)), int(mt.group(2)), int(mt.group(3)),
                                   int(mt.group(4)), kinds))
        else:
            if cur_id is None:
                raise IRTextError(i, "instruction outside block")
            cur.append(parse_instr(raw, i))
    raise IRTextError(len(lines), f"unterminated function {name!r}")
