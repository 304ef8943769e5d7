"""Table interpretation: compile a function to a private bytecode run by an embedded dispatch loop.

Scalar (int/bool) registers move into a register-file array indexed by
operands in the code array. Array registers stay native; opcodes that touch
them are specialized per register, so the code array holds only integers.
"""
from __future__ import annotations

import random

from ..ir.model import ARR, BOOL, INT, Function, Instr, Program
from .engine import Context, NoEligibleSites, UnsupportedFeature, register

TAG = "dispatcher"


def _lower_switches(fn: Function) -> None:
    """Replace each ``switch`` by a chain of equality branches."""
    for blk in list(fn.blocks):
        if blk.term.op != "switch":
            continue
        x, cases, default = blk.term.args
        nxt = default
        for key, target in reversed(list(dict(cases).items())):
            k, c = fn.new_reg(INT), fn.new_reg(BOOL)
            nxt = fn.add_block([Instr("const", k, (key,)), Instr("eq", c, (x, k))],
                               Instr("br", None, (c, target, nxt))).id
        blk.term = Instr("jmp", None, (nxt,), blk.term.tag, blk.term.span)


def _unit(ins: Instr, slot: dict[int, int], types: list[str]) -> tuple[tuple, list]:
    """(opcode kind, operand list) for one instruction; ``("@", b)`` marks a block address."""
    op, d, a = ins.op, ins.dst, ins.args
    s = slot.get
    if op == "const":
        return ("const",), [s(d), a[0]]
    if op == "null":
        return ("null", d), []
    if op == "arrlit":
        return ("arrlit", d, a[0]), []
    if op == "move":
        if types[d] == ARR:
            return ("amove", d, a[0]), []
        return ("move",), [s(d), s(a[0])]
    if op in ("neg", "not"):
        return ("un", op), [s(d), s(a[0])]
    if op == "isnull":
        return ("isnull", a[0]), [s(d)]
    if op == "len":
        return ("len", a[0]), [s(d)]
    if op == "newarr":
        return ("newarr", d), [s(a[0])]
    if op == "load":
        return ("load", a[0]), [s(d), s(a[1])]
    if op == "store":
        return ("store", a[0]), [s(a[1]), s(a[2])]
    if op == "print":
        if types[a[0]] == ARR:
            return ("aprint", a[0]), []
        return ("print",), [s(a[0])]
    if op == "print_str":
        return ("print_str", a[0]), []
    if op == "jmp":
        return ("jmp",), [("@", a[0])]
    if op == "br":
        return ("br",), [s(a[0]), ("@", a[1]), ("@", a[2])]
    if op == "ret":
        if not a:
            return ("ret0",), []
        if types[a[0]] == ARR:
            return ("aret", a[0]), []
        return ("ret",), [s(a[0])]
    if op == "throw":
        return ("throw",), [s(a[0])]
    if len(a) == 2 and d is not None:  # binary arithmetic, logic and compares
        return ("bin", op), [s(d), s(a[0]), s(a[1])]
    raise UnsupportedFeature(op)


class _Case:
    """Emits the body of one opcode case."""

    def __init__(self, fn: Function, v: dict):
        self.fn, self.v, self.out = fn, v, []

    def tmp(self) -> int:
        return self.fn.new_reg(INT)

    def emit(self, op: str, dst, args) -> int | None:
        self.out.append(Instr(op, dst, tuple(args), TAG))
        return dst

    def operand(self, k: int) -> int:
        """Load operand ``k`` (1-based) of the current unit."""
        v = self.v
        i = self.emit("add", self.tmp(), (v["pc"], v["k"][k]))
        return self.emit("load", self.tmp(), (v["code"], i))

    def get(self, k: int) -> int:
        """Load the scalar register named by operand ``k``."""
        return self.emit("load", self.tmp(), (self.v["R"], self.operand(k)))

    def put(self, k: int, value: int) -> None:
        self.emit("store", None, (self.v["R"], self.operand(k), value))


def _case_body(kind: tuple, size: int, fn: Function, v: dict) -> tuple[list[Instr], Instr]:
    c = _Case(fn, v)
    head = kind[0]
    term = None
    if head == "const":
        c.put(1, c.operand(2))
    elif head == "null":
        c.emit("null", kind[1], ())
    elif head == "arrlit":
        c.emit("arrlit", kind[1], (kind[2],))
    elif head == "amove":
        c.emit("move", kind[1], (kind[2],))
    elif head == "move":
        c.put(1, c.get(2))
    elif head == "un":
        c.put(1, c.emit(kind[1], c.tmp(), (c.get(2),)))
    elif head in ("isnull", "len"):
        c.put(1, c.emit(head, c.tmp(), (kind[1],)))
    elif head == "newarr":
        c.emit("newarr", kind[1], (c.get(1),))
    elif head == "load":
        c.put(1, c.emit("load", c.tmp(), (kind[1], c.get(2))))
    elif head == "store":
        c.emit("store", None, (kind[1], c.get(1), c.get(2)))
    elif head == "print":
        c.emit("print", None, (c.get(1),))
    elif head == "aprint":
        c.emit("print", None, (kind[1],))
    elif head == "print_str":
        c.emit("print_str", None, (kind[1],))
    elif head == "bin":
        a, b = c.get(2), c.get(3)
        c.put(1, c.emit(kind[1], c.tmp(), (a, b)))
    elif head == "jmp":
        c.emit("load", v["pc"], (v["code"], c.emit("add", c.tmp(), (v["pc"], v["k"][1]))))
    elif head == "br":
        # pc = F + (cond != 0) * (T - F)
        cond = c.emit("ne", c.tmp(), (c.get(1), v["k"][0]))
        t, f = c.operand(2), c.operand(3)
        diff = c.emit("sub", c.tmp(), (t, f))
        step = c.emit("mul", c.tmp(), (cond, diff))
        c.emit("add", v["pc"], (f, step))
    elif head == "ret":
        term = Instr("ret", None, (c.get(1),), TAG)
    elif head == "aret":
        term = Instr("ret", None, (kind[1],), TAG)
    elif head == "ret0":
        term = Instr("ret", None, (), TAG)
    elif head == "throw":
        term = Instr("throw", None, (c.get(1),), TAG)
    if term is None:
        if head not in ("jmp", "br"):
            c.emit("add", v["pc"], (v["pc"], v["k"][size]))
        term = Instr("jmp", None, (v["head"],), TAG)
    return c.out, term


def virtualize_function(fn: Function, seed: int | str = 0) -> Function:
    """Replace the body of ``fn`` (in place) by bytecode plus a fetch-decode-execute loop."""
    if fn.traps:
        raise UnsupportedFeature("traps")
    if any(ins.op in ("call", "catch") for _, _, ins in fn.instructions()):
        raise UnsupportedFeature("calls")
    rng = random.Random(f"virtualize:{seed}")
    _lower_switches(fn)
    types = list(fn.reg_types)
    scalars = [r for r, t in enumerate(types) if t != ARR]
    slot = {r: k for k, r in enumerate(scalars)}

    units: list[tuple[tuple, list]] = []
    addr: dict[int, int] = {}
    pos = 0
    for blk in fn.blocks:
        addr[blk.id] = pos
        for ins in blk.instrs + [blk.term]:
            kind, ops = _unit(ins, slot, types)
            units.append((kind, ops))
            pos += 1 + len(ops)

    kinds: list[tuple] = []
    for kind, _ in units:
        if kind not in kinds:
            kinds.append(kind)
    base = rng.randint(0, 64)
    numbers = list(range(base, base + len(kinds)))
    rng.shuffle(numbers)
    opcode = dict(zip(kinds, numbers))
    code: list[int] = []
    sizes: dict[tuple, int] = {}
    for kind, ops in units:
        sizes[kind] = 1 + len(ops)
        code.append(opcode[kind])
        code += [addr[o[1]] if isinstance(o, tuple) else o for o in ops]

    params, entry_block = fn.params, fn.entry
    fn.blocks, fn.traps = [], []
    v = {"code": fn.new_reg(ARR), "R": fn.new_reg(ARR), "pc": fn.new_reg(INT),
         "k": [fn.new_reg(INT) for _ in range(max(sizes.values()) + 1)]}
    setup = [Instr("arrlit", v["code"], (tuple(code),), TAG)]
    setup += [Instr("const", r, (k,), TAG) for k, r in enumerate(v["k"])]
    n = fn.new_reg(INT)
    setup += [Instr("const", n, (len(scalars),), TAG), Instr("newarr", v["R"], (n,), TAG)]
    for p in params:
        if types[p] != ARR:
            i = fn.new_reg(INT)
            setup += [Instr("const", i, (slot[p],), TAG), Instr("store", None, (v["R"], i, p), TAG)]
    setup.append(Instr("const", v["pc"], (addr[entry_block],), TAG))
    entry = fn.add_block(setup, Instr("jmp", None, (0,), TAG))
    op = fn.new_reg(INT)
    head = fn.add_block([Instr("load", op, (v["code"], v["pc"]), TAG)], Instr("jmp", None, (0,), TAG))
    entry.term = Instr("jmp", None, (head.id,), TAG)
    v["head"] = head.id
    cases = []
    for kind in kinds:
        instrs, term = _case_body(kind, sizes[kind], fn, v)
        cases.append((opcode[kind], fn.add_block(instrs, term).id))
    head.term = Instr("switch", None, (op, tuple(cases), cases[0][1]), TAG)
    fn.entry = entry.id
    return fn


def _eligible(fn: Function) -> str | None:
    if fn.traps:
        return "traps"
    if any(ins.op in ("call", "catch") for _, _, ins in fn.instructions()):
        return "calls"
    return None


@register("table_interpretation")
def table_interpretation(ctx: Context, program: Program) -> list[str]:
    reasons = {f.name: _eligible(f) for f in program.functions}
    ok = [f for f in program.functions if reasons[f.name] is None]
    if not ok:
        first = next(iter(reasons.values()), None)
        if first is None:
            raise NoEligibleSites("no functions")
        raise UnsupportedFeature(first)
    sites = []
    for fn in ctx.select(ok):
        virtualize_function(fn, ctx.seed())
        sites.append(fn.name)
    return sites
