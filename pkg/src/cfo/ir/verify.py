"""Structural checks for IR programs.

``verify`` never raises on malformed input; it collects one diagnostic per
violated rule so that pass authors get the whole picture at once.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import (
    ARR, BINARY_OPS, BOOL, INT, OPCODES, REG_TYPES, TAGS, TERMINATORS,
    TRAP_KINDS, UNARY_OPS, VOID, Function, Instr, Program,
)


@dataclass(frozen=True)
class Diagnostic:
    function: str
    block: int | None
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        where = self.function if self.block is None else f"{self.function}:b{self.block}"
        return f"{where}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


class VerifyError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics[:5]))


_ARITY = {
    "const": 1, "null": 0, "arrlit": 1, "load": 2, "store": 3, "print": 1,
    "print_str": 1, "catch": 0, "jmp": 1, "br": 3, "switch": 3, "throw": 1,
    "call": 2,
}
_ARITY.update({op: 2 for op in BINARY_OPS})
_ARITY.update({op: 1 for op in UNARY_OPS})


def verify(program: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    names = [f.name for f in program.functions]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            diags.append(Diagnostic(n, None, "duplicate function"))
        seen.add(n)
    fmap = program.function_map()
    main = fmap.get(program.entry)
    if main is None:
        diags.append(Diagnostic(program.entry, None, "missing entry function"))
    elif main.param_types() != [ARR] or main.ret_type != INT:
        diags.append(Diagnostic(main.name, None, "bad entry signature", "expected (arr) -> int"))
    for fn in program.functions:
        diags.extend(_verify_function(fn, fmap))
    return diags


def check(program: Program) -> None:
    """Raise :class:`VerifyError` unless ``program`` is well formed."""
    diags = verify(program)
    if diags:
        raise VerifyError(diags)


def _verify_function(fn: Function, fmap: dict[str, Function]) -> list[Diagnostic]:
    out: list[Diagnostic] = []

    def bad(block: int | None, rule: str, detail: str = "") -> None:
        out.append(Diagnostic(fn.name, block, rule, detail))

    nregs = len(fn.reg_types)
    for t in fn.reg_types:
        if t not in REG_TYPES:
            bad(None, "bad register type", t)
    if fn.ret_type not in REG_TYPES + (VOID,):
        bad(None, "bad return type", fn.ret_type)
    if len(set(fn.params)) != len(fn.params) or any(not 0 <= p < nregs for p in fn.params):
        bad(None, "bad parameter registers")

    ids = [b.id for b in fn.blocks]
    if len(set(ids)) != len(ids):
        bad(None, "duplicate block id")
    bmap = fn.block_map()
    if fn.entry not in bmap:
        bad(None, "missing entry block", f"b{fn.entry}")
        return out

    handlers = fn.handlers()
    normal_targets: set[int] = set()

    def reg_ok(block: int, r: object, want: str | None = None) -> None:
        if not isinstance(r, int) or not 0 <= r < nregs:
            bad(block, "unknown register", repr(r))
        elif want is not None and fn.reg_types[r] != want:
            if not (want == INT and fn.reg_types[r] == BOOL):
                bad(block, "register type", f"%{r} is {fn.reg_types[r]}, expected {want}")

    for b in fn.blocks:
        if not isinstance(b.term, Instr) or b.term.op not in TERMINATORS:
            bad(b.id, "missing terminator")
        for i, ins in enumerate(b.instrs):
            if ins.op in TERMINATORS:
                bad(b.id, "code after terminator", f"index {i}")
            if ins.op == "catch" and (i != 0 or b.id not in handlers):
                bad(b.id, "misplaced catch", f"index {i}")
        if b.id in handlers and (not b.instrs or b.instrs[0].op != "catch"):
            bad(b.id, "handler without catch")
        for ins in b.instrs + [b.term]:
            if ins.op not in OPCODES:
                bad(b.id, "unknown opcode", ins.op)
                continue
            if ins.tag not in TAGS:
                bad(b.id, "unknown tag", ins.tag)
            if ins.op == "ret":
                if len(ins.args) > 1:
                    bad(b.id, "operand arity", "ret")
                if (fn.ret_type == VOID) != (len(ins.args) == 0):
                    bad(b.id, "return arity")
            elif len(ins.args) != _ARITY[ins.op]:
                bad(b.id, "operand arity", ins.op)
                continue
            _check_operands(fn, fmap, b.id, ins, reg_ok, bad)
            for t in ins.targets():
                if t not in bmap:
                    bad(b.id, "dangling target", f"b{t}")
                else:
                    normal_targets.add(t)

    if fn.entry in normal_targets:
        bad(fn.entry, "entry has predecessors")
    for h in handlers & normal_targets:
        bad(h, "handler reached by normal edge")

    per_block: dict[int, list] = {}
    for t in fn.traps:
        blk = bmap.get(t.block)
        if blk is None:
            bad(t.block, "trap on unknown block")
            continue
        if t.handler not in bmap:
            bad(t.block, "dangling target", f"handler b{t.handler}")
        if not 0 <= t.start < t.end <= len(blk.instrs) + 1:
            bad(t.block, "bad trap range", f"[{t.start},{t.end})")
        if not t.kinds or any(k not in TRAP_KINDS for k in t.kinds):
            bad(t.block, "bad trap kinds")
        per_block.setdefault(t.block, []).append(t)
    # inner ranges must precede the ranges that strictly contain them
    for bid, entries in per_block.items():
        for i, outer in enumerate(entries):
            for inner in entries[i + 1:]:
                if (outer.start <= inner.start and inner.end <= outer.end
                        and (outer.start, outer.end) != (inner.start, inner.end)
                        and outer.kinds & inner.kinds):
                    bad(bid, "trap order", "inner range listed after enclosing range")
    return out


def _check_operands(fn, fmap, bid, ins: Instr, reg_ok, bad) -> None:
    op, a = ins.op, ins.args
    if ins.dst is not None:
        reg_ok(bid, ins.dst)
    needs_dst = op in BINARY_OPS or op in UNARY_OPS or op in (
        "const", "null", "arrlit", "load", "catch")
    if needs_dst and ins.dst is None:
        bad(bid, "missing destination", op)
    if op in ("store", "print", "print_str", "jmp", "br", "switch", "ret", "throw") and ins.dst is not None:
        bad(bid, "unexpected destination", op)
    if op == "const":
        if not isinstance(a[0], int):
            bad(bid, "bad immediate")
    elif op == "arrlit":
        if not isinstance(a[0], tuple) or not all(isinstance(v, int) for v in a[0]):
            bad(bid, "bad immediate")
        reg_ok(bid, ins.dst, ARR)
    elif op == "null":
        reg_ok(bid, ins.dst, ARR)
    elif op in BINARY_OPS:
        for r in a:
            reg_ok(bid, r)
            if isinstance(r, int) and 0 <= r < len(fn.reg_types) and fn.reg_types[r] == ARR:
                bad(bid, "register type", f"array operand to {op}")
    elif op in ("len", "isnull"):
        reg_ok(bid, a[0], ARR)
    elif op == "newarr":
        reg_ok(bid, a[0], INT)
        reg_ok(bid, ins.dst, ARR)
    elif op in ("move", "neg", "not"):
        reg_ok(bid, a[0])
    elif op == "load":
        reg_ok(bid, a[0], ARR)
        reg_ok(bid, a[1], INT)
    elif op == "store":
        reg_ok(bid, a[0], ARR)
        reg_ok(bid, a[1], INT)
        reg_ok(bid, a[2], INT)
    elif op == "print":
        reg_ok(bid, a[0])
    elif op == "print_str":
        if not isinstance(a[0], str):
            bad(bid, "bad immediate")
    elif op == "call":
        callee = fmap.get(a[0])
        if callee is None:
            bad(bid, "unknown callee", str(a[0]))
        else:
            if len(callee.params) != len(a[1]):
                bad(bid, "call arity", a[0])
            if ins.dst is not None and callee.ret_type == VOID:
                bad(bid, "void result used", a[0])
        for r in a[1]:
            reg_ok(bid, r)
    elif op in ("br", "throw"):
        reg_ok(bid, a[0])
    elif op == "switch":
        reg_ok(bid, a[0])
        keys = [k for k, _ in a[1]]
        if len(set(keys)) != len(keys):
            bad(bid, "duplicate switch key")
    elif op == "ret":
        for r in a:
            reg_ok(bid, r)
