"""Core data types of the register-based CFG intermediate representation.

A program is an ordered list of functions. A function owns a typed register
pool, a list of basic blocks and a trap table. Every block is a run of
non-terminator instructions closed by exactly one terminator.

Registers are small integers (rendered ``%N``); block ids are small integers
(rendered ``bN``). All registers of a frame start out as 0 (int/bool) or null
(arr), so reading a register before any write is well defined.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

INT, BOOL, ARR = "int", "bool", "arr"
VOID = "void"
REG_TYPES = (INT, BOOL, ARR)

# trap kinds and the codes builtin faults deliver to handlers
NULL_ACCESS = "NullAccess"
INDEX_OOB = "IndexOutOfBounds"
DIV_BY_ZERO = "DivByZero"
USER = "User"
TRAP_KINDS = (NULL_ACCESS, INDEX_OOB, DIV_BY_ZERO, USER)
ALL_KINDS = frozenset(TRAP_KINDS)
BUILTIN_CODES = {NULL_ACCESS: -1, INDEX_OOB: -2, DIV_BY_ZERO: -3}

TAGS = ("original", "opaque", "dead", "irrelevant", "dispatcher", "buffer")

BINARY_OPS = (
    "add", "sub", "mul", "div", "rem",
    "eq", "ne", "lt", "le", "gt", "ge",
    "and", "or", "xor", "min",
)
COMPARE_OPS = ("eq", "ne", "lt", "le", "gt", "ge")
UNARY_OPS = ("move", "neg", "not", "isnull", "len", "newarr")
TERMINATORS = ("jmp", "br", "switch", "ret", "throw")
INTRINSICS = ("print", "print_str", "len", "min")
# instructions that may raise a trap when executed
TRAPPING = frozenset({"div", "rem", "load", "store", "len", "newarr", "call", "throw"})
EFFECTFUL = frozenset({"call", "print", "print_str", "catch"})
MEMORY = frozenset({"load", "store", "len", "newarr", "arrlit"})

OPCODES = frozenset(
    BINARY_OPS + UNARY_OPS + TERMINATORS
    + ("const", "null", "arrlit", "load", "store", "call", "print", "print_str", "catch")
)


@dataclass
class Instr:
    """One IR instruction.

    ``args`` layout depends on ``op``:

    ========  ==========================================
    const     (value,)
    null      ()
    arrlit    (values_tuple,)
    binary    (a, b)
    unary     (a,)
    load      (array, index)
    store     (array, index, value)
    call      (callee_name, arg_regs_tuple)
    print     (a,)
    print_str (text,)
    catch     ()
    jmp       (target,)
    br        (cond, if_true, if_false)
    switch    (reg, ((key, target), ...), default)
    ret       () or (reg,)
    throw     (reg,)
    ========  ==========================================
    """

    op: str
    dst: int | None = None
    args: tuple = ()
    tag: str = "original"
    span: object = field(default=None, compare=False, repr=False)

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    def reads(self) -> tuple[int, ...]:
        op, a = self.op, self.args
        if op in ("const", "null", "arrlit", "catch", "print_str", "jmp"):
            return ()
        if op == "call":
            return tuple(a[1])
        if op == "br" or op == "switch" or op == "throw":
            return (a[0],)
        if op == "ret":
            return tuple(a)
        return tuple(a)

    def writes(self) -> tuple[int, ...]:
        return () if self.dst is None else (self.dst,)

    def targets(self) -> tuple[int, ...]:
        op, a = self.op, self.args
        if op == "jmp":
            return (a[0],)
        if op == "br":
            return (a[1], a[2])
        if op == "switch":
            return tuple(t for _, t in a[1]) + (a[2],)
        return ()

    def retarget(self, mapping: dict[int, int]) -> "Instr":
        """Return a copy with branch targets renamed through ``mapping``."""
        op, a = self.op, self.args
        m = lambda t: mapping.get(t, t)  # noqa: E731
        if op == "jmp":
            args = (m(a[0]),)
        elif op == "br":
            args = (a[0], m(a[1]), m(a[2]))
        elif op == "switch":
            args = (a[0], tuple((k, m(t)) for k, t in a[1]), m(a[2]))
        else:
            return self
        return Instr(op, self.dst, args, self.tag, self.span)

    def rename(self, regmap: dict[int, int]) -> "Instr":
        """Return a copy with every register operand renamed through ``regmap``."""
        r = lambda x: regmap.get(x, x)  # noqa: E731
        op, a = self.op, self.args
        if op in ("const", "arrlit", "print_str", "jmp", "null", "catch"):
            args = a
        elif op == "call":
            args = (a[0], tuple(r(x) for x in a[1]))
        elif op in ("br", "switch", "throw"):
            args = (r(a[0]),) + a[1:]
        else:
            args = tuple(r(x) for x in a)
        dst = None if self.dst is None else r(self.dst)
        return Instr(op, dst, args, self.tag, self.span)

    def with_tag(self, tag: str) -> "Instr":
        return Instr(self.op, self.dst, self.args, tag, self.span)


@dataclass
class Block:
    id: int
    instrs: list[Instr]
    term: Instr

    def successors(self) -> tuple[int, ...]:
        return self.term.targets()

    def __len__(self) -> int:
        return len(self.instrs)


@dataclass
class TrapEntry:
    """Instruction range ``[start, end)`` of ``block`` guarded by ``handler``.

    Index ``len(block.instrs)`` denotes the terminator, so ``end`` may reach
    ``len(block.instrs) + 1``.
    """

    block: int
    start: int
    end: int
    handler: int
    kinds: frozenset[str] = ALL_KINDS

    def covers(self, index: int) -> bool:
        return self.start <= index < self.end


@dataclass
class Function:
    name: str
    params: list[int]
    ret_type: str
    reg_types: list[str]
    blocks: list[Block]
    entry: int = 0
    traps: list[TrapEntry] = field(default_factory=list)

    # -- lookup -------------------------------------------------------------
    def block_map(self) -> dict[int, Block]:
        return {b.id: b for b in self.blocks}

    def block(self, bid: int) -> Block:
        for b in self.blocks:
            if b.id == bid:
                return b
        raise KeyError(f"{self.name}: no block b{bid}")

    def param_types(self) -> list[str]:
        return [self.reg_types[p] for p in self.params]

    def instructions(self) -> Iterator[tuple[Block, int, Instr]]:
        """Yield ``(block, index, instr)`` including terminators."""
        for b in self.blocks:
            for i, ins in enumerate(b.instrs):
                yield b, i, ins
            yield b, len(b.instrs), b.term

    def instruction_count(self) -> int:
        return sum(len(b.instrs) + 1 for b in self.blocks)

    def handlers(self) -> set[int]:
        return {t.handler for t in self.traps}

    def clone(self) -> "Function":
        return Function(self.name, list(self.params), self.ret_type, list(self.reg_types),
                        [Block(b.id, list(b.instrs), b.term) for b in self.blocks], self.entry,
                        [replace(t) for t in self.traps])

    # -- mutation helpers (used on private copies inside passes) ------------
    def new_reg(self, typ: str) -> int:
        self.reg_types.append(typ)
        return len(self.reg_types) - 1

    def new_block_id(self) -> int:
        return max((b.id for b in self.blocks), default=-1) + 1

    def add_block(self, instrs: Iterable[Instr], term: Instr) -> Block:
        b = Block(self.new_block_id(), list(instrs), term)
        self.blocks.append(b)
        return b

    def successor_map(self, with_traps: bool = True) -> dict[int, list[int]]:
        """Successor lists keyed by block id; trap edges appended when asked."""
        succ = {b.id: list(dict.fromkeys(b.successors())) for b in self.blocks}
        if with_traps:
            for t in self.traps:
                if t.handler not in succ[t.block]:
                    succ[t.block].append(t.handler)
        return succ

    def predecessor_map(self, with_traps: bool = True) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {b.id: [] for b in self.blocks}
        for src, dsts in self.successor_map(with_traps).items():
            for d in dsts:
                if d in preds and src not in preds[d]:
                    preds[d].append(src)
        return preds


@dataclass
class Program:
    functions: list[Function]
    entry: str = "main"
    # MiniLang syntax tree this IR was lowered from, while it still matches
    source: object = field(default=None, compare=False, repr=False)

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(f"no function {name!r}")

    def function_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    def instruction_count(self) -> int:
        return sum(f.instruction_count() for f in self.functions)

    def clone(self) -> "Program":
        """Copy of every mutable container; instructions are never mutated and are shared.

        The syntax tree is shared too: source-level passes copy it before editing.
        """
        return Program([f.clone() for f in self.functions], self.entry, self.source)
