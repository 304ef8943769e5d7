"""Reference executor for IR programs.

Each function is compiled once into per-block lists of Python closures.
Blocks are charged against the fuel budget in segments that end at call
instructions, so the callee always sees the exact number of steps spent so
far; the step count and fuel semantics are per instruction.
"""
from __future__ import annotations

import os
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .ir.model import (
    ARR, BUILTIN_CODES, DIV_BY_ZERO, INDEX_OOB, NULL_ACCESS, USER, Function, Program,
)

DEFAULT_FUEL = 10_000_000
MAX_CALL_DEPTH = 400

_HALF = 1 << 63
_MASK = (1 << 64) - 1


def wrap(v: int) -> int:
    """Reduce an integer to signed 64-bit two's complement."""
    return ((v + _HALF) & _MASK) - _HALF


def tdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def trem(a: int, b: int) -> int:
    return a - b * tdiv(a, b)


def default_fuel() -> int:
    env = os.environ.get("CFO_FUEL")
    return int(env) if env else DEFAULT_FUEL


@dataclass(frozen=True)
class Outcome:
    kind: str  # "returned" | "trapped" | "fuel_exhausted"
    value: object = None  # return value (int, list or None) when returned
    trap_kind: str | None = None
    code: int | None = None

    def __str__(self) -> str:
        if self.kind == "returned":
            return f"returned({_render(self.value)})"
        if self.kind == "trapped":
            return f"trapped({self.trap_kind}, {self.code})"
        return "fuel_exhausted"


@dataclass
class ExecutionResult:
    outcome: Outcome
    output: list[str]
    steps: int

    def observable(self) -> tuple:
        return (self.outcome, tuple(self.output))


@dataclass
class CoverageMap:
    """Execution count per ``(function, block, instruction index)``.

    Index ``len(block.instrs)`` is the terminator. Instructions never executed
    are absent (count 0).
    """

    counts: Counter = field(default_factory=Counter)

    def __getitem__(self, key: tuple[str, int, int]) -> int:
        return self.counts.get(key, 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "CoverageMap") -> None:
        self.counts.update(other.counts)


def _render(v: object) -> str:
    if v is None:
        return "null"
    if isinstance(v, list):
        return "[" + ", ".join(str(x) for x in v) + "]"
    return str(v)


class _Trap(Exception):
    __slots__ = ("kind", "code", "index")

    def __init__(self, kind: str, code: int, index: int):
        self.kind = kind
        self.code = code
        self.index = index


class _OutOfFuel(Exception):
    """Budget exhausted; ``index`` is the last instruction charged in the current frame."""

    __slots__ = ("index", "settled")

    def __init__(self, index: int = -1, settled: bool = False):
        self.index = index
        self.settled = settled  # steps already exact, nothing to refund


def _fault(kind: str, index: int) -> _Trap:
    return _Trap(kind, BUILTIN_CODES[kind], index)


class _CompiledBlock:
    __slots__ = ("id", "segments", "ninstr", "traps")

    def __init__(self, bid: int, segments: list, ninstr: int, traps: list):
        self.id = bid
        self.segments = segments  # [(first_index, (closure, ...)), ...]
        self.ninstr = ninstr  # instructions including terminator
        self.traps = traps  # [(start, end, handler, kinds), ...] in table order


class _CompiledFunction:
    __slots__ = ("name", "blocks", "entry", "nregs", "init", "params", "ret_slot", "code_slot")

    def __init__(self, fn: Function):
        self.name = fn.name
        self.nregs = len(fn.reg_types)
        self.ret_slot = self.nregs
        self.code_slot = self.nregs + 1
        # extra slots: return value, pending trap code, next block id (regs[-1])
        self.init = [None if t == ARR else 0 for t in fn.reg_types] + [None, 0, 0]
        self.params = list(fn.params)
        self.entry = fn.entry
        self.blocks: dict[int, _CompiledBlock] = {}


class Interpreter:
    """Executes one program; instances are cheap and hold per-run counters."""

    def __init__(self, program: Program):
        self.program = program
        self._funcs: dict[str, _CompiledFunction] = {}
        for fn in program.functions:
            self._funcs[fn.name] = _CompiledFunction(fn)
        for fn in program.functions:
            self._compile(fn)
        self.steps = 0
        self.fuel = 0
        self.output: list[str] = []
        self.coverage: Counter | None = None
        self.partial: Counter | None = None
        self.trace: list | None = None
        self.depth = 0

    # -- public -------------------------------------------------------------
    def run(self, inputs: Sequence[int] | None, fuel: int | None = None,
            coverage: bool = False, trace: list | None = None) -> ExecutionResult:
        self.steps = 0
        self.fuel = default_fuel() if fuel is None else fuel
        self.output = []
        self.coverage = Counter() if coverage else None
        self.partial = Counter() if coverage else None
        self.trace = trace
        self.depth = 0
        arg = None if inputs is None else [wrap(int(v)) for v in inputs]
        main = self._funcs[self.program.entry]
        try:
            value = self._call(main, [arg])
            outcome = Outcome("returned", value)
        except _Trap as t:
            outcome = Outcome("trapped", trap_kind=t.kind, code=t.code)
        except _OutOfFuel:
            outcome = Outcome("fuel_exhausted")
        return ExecutionResult(outcome, self.output, self.steps)

    def coverage_map(self) -> CoverageMap:
        cov = CoverageMap()
        if self.coverage is None:
            return cov
        sizes = {(f.name, b.id): len(b.instrs) + 1 for f in self.program.functions for b in f.blocks}
        for (fname, bid), n in self.coverage.items():
            for i in range(sizes[(fname, bid)]):
                cov.counts[(fname, bid, i)] += n
        for (fname, bid, last), n in self.partial.items():
            for i in range(last + 1):
                cov.counts[(fname, bid, i)] += n
        return cov

    # -- execution ------------------------------------------------------------
    def _call(self, cf: _CompiledFunction, args: list) -> object:
        if self.depth >= MAX_CALL_DEPTH:
            raise _OutOfFuel()
        self.depth += 1
        regs = cf.init[:]
        for p, v in zip(cf.params, args):
            regs[p] = v
        blocks = cf.blocks
        bid = cf.entry
        cov = self.coverage
        trace = self.trace
        name = cf.name
        try:
            while True:
                blk = blocks[bid]
                if trace is not None:
                    trace.append((name, bid))
                try:
                    for first, ops in blk.segments:
                        n = len(ops)
                        if self.steps + n > self.fuel:
                            self._starve(first, ops, regs)
                        self.steps += n
                        for op in ops:
                            op(regs)
                    bid = regs[-1]
                    if cov is not None:
                        cov[(name, blk.id)] += 1
                    if bid < 0:
                        return regs[cf.ret_slot]
                except _Trap as t:
                    self._unwind(name, blk, t.index)
                    for start, end, handler, kinds in blk.traps:
                        if start <= t.index < end and t.kind in kinds:
                            regs[cf.code_slot] = t.code
                            bid = handler
                            break
                    else:
                        raise _Trap(t.kind, t.code, -1) from None
                except _OutOfFuel as e:
                    self._unwind(name, blk, e.index, refund=not e.settled)
                    raise _OutOfFuel() from None
        finally:
            self.depth -= 1

    def _unwind(self, name: str, blk: _CompiledBlock, idx: int, refund: bool = True) -> None:
        """Refund the charged tail after ``idx`` and record the partial block."""
        for first, ops in blk.segments:
            if refund and first <= idx < first + len(ops):
                self.steps -= first + len(ops) - idx - 1
                break
        if self.partial is not None and idx >= 0:
            self.partial[(name, blk.id, idx)] += 1

    def _starve(self, first: int, ops: tuple, regs: list) -> None:
        """Run as much of a segment as the budget allows, then stop with steps == fuel."""
        budget = self.fuel - self.steps
        for k in range(budget):
            self.steps += 1
            try:
                ops[k](regs)
            except _Trap:
                # charge the whole segment so the handler-side refund stays exact
                self.steps += len(ops) - k - 1
                raise
        raise _OutOfFuel(first + budget - 1, settled=True)

    # -- compilation ------------------------------------------------------------
    def _compile(self, fn: Function) -> None:
        cf = self._funcs[fn.name]
        for b in fn.blocks:
            closures: list[Callable] = []
            segments = []
            seg_start = 0
            for i, ins in enumerate(b.instrs):
                closures.append(self._compile_instr(ins, i, cf))
                if ins.op == "call":
                    segments.append((seg_start, tuple(closures)))
                    closures, seg_start = [], i + 1
            closures.append(self._compile_term(b.term, len(b.instrs), cf))
            segments.append((seg_start, tuple(closures)))
            traps = [(t.start, t.end, t.handler, t.kinds) for t in fn.traps if t.block == b.id]
            cf.blocks[b.id] = _CompiledBlock(b.id, segments, len(b.instrs) + 1, traps)

    def _compile_instr(self, ins, idx: int, cf: _CompiledFunction) -> Callable:
        op, a, d = ins.op, ins.args, ins.dst
        if op == "const":
            v = a[0]

            def f(r):
                r[d] = v
        elif op == "null":
            def f(r):
                r[d] = None
        elif op == "arrlit":
            vals = list(a[0])

            def f(r):
                r[d] = vals[:]
        elif op == "move":
            x, = a

            def f(r):
                r[d] = r[x]
        elif op == "add":
            x, y = a

            def f(r):
                v = r[x] + r[y]
                r[d] = v if -_HALF <= v < _HALF else wrap(v)
        elif op == "sub":
            x, y = a

            def f(r):
                v = r[x] - r[y]
                r[d] = v if -_HALF <= v < _HALF else wrap(v)
        elif op == "mul":
            x, y = a

            def f(r):
                v = r[x] * r[y]
                r[d] = v if -_HALF <= v < _HALF else wrap(v)
        elif op == "div" or op == "rem":
            x, y = a
            is_div = op == "div"

            def f(r):
                q = r[y]
                if q == 0:
                    raise _fault(DIV_BY_ZERO, idx)
                p = r[x]
                r[d] = wrap(tdiv(p, q)) if is_div else trem(p, q)
        elif op in ("eq", "ne", "lt", "le", "gt", "ge"):
            f = _compare(op, a[0], a[1], d)
        elif op == "and":
            x, y = a

            def f(r):
                r[d] = r[x] & r[y]
        elif op == "or":
            x, y = a

            def f(r):
                r[d] = r[x] | r[y]
        elif op == "xor":
            x, y = a

            def f(r):
                r[d] = r[x] ^ r[y]
        elif op == "min":
            x, y = a

            def f(r):
                p, q = r[x], r[y]
                r[d] = p if p <= q else q
        elif op == "neg":
            x, = a

            def f(r):
                r[d] = wrap(-r[x])
        elif op == "not":
            x, = a

            def f(r):
                r[d] = 0 if r[x] else 1
        elif op == "isnull":
            x, = a

            def f(r):
                r[d] = 1 if r[x] is None else 0
        elif op == "len":
            x, = a

            def f(r):
                arr = r[x]
                if arr is None:
                    raise _fault(NULL_ACCESS, idx)
                r[d] = len(arr)
        elif op == "newarr":
            x, = a

            def f(r):
                n = r[x]
                if n < 0:
                    raise _fault(INDEX_OOB, idx)
                if n > 1 << 20:
                    raise _OutOfFuel(idx)
                r[d] = [0] * n
        elif op == "load":
            x, y = a

            def f(r):
                arr = r[x]
                if arr is None:
                    raise _fault(NULL_ACCESS, idx)
                i = r[y]
                if not 0 <= i < len(arr):
                    raise _fault(INDEX_OOB, idx)
                r[d] = arr[i]
        elif op == "store":
            x, y, z = a

            def f(r):
                arr = r[x]
                if arr is None:
                    raise _fault(NULL_ACCESS, idx)
                i = r[y]
                if not 0 <= i < len(arr):
                    raise _fault(INDEX_OOB, idx)
                arr[i] = r[z]
        elif op == "print":
            x, = a
            out = self

            def f(r):
                out.output.append(_render(r[x]))
        elif op == "print_str":
            text = a[0]
            out = self

            def f(r):
                out.output.append(text)
        elif op == "catch":
            slot = cf.code_slot

            def f(r):
                r[d] = r[slot]
        elif op == "call":
            callee = self._funcs[a[0]]
            argregs = a[1]
            interp = self

            def f(r):
                try:
                    v = interp._call(callee, [r[x] for x in argregs])
                except _Trap as t:
                    raise _Trap(t.kind, t.code, idx) from None
                except _OutOfFuel:
                    raise _OutOfFuel(idx) from None
                if d is not None:
                    r[d] = v
        else:  # pragma: no cover - verify rejects unknown opcodes
            raise ValueError(f"cannot execute {op!r}")
        return f

    def _compile_term(self, ins, idx: int, cf: _CompiledFunction) -> Callable:
        op, a = ins.op, ins.args
        if op == "jmp":
            t, = a

            def f(r):
                r[-1] = t
        elif op == "br":
            c, t, e = a

            def f(r):
                r[-1] = t if r[c] else e
        elif op == "switch":
            x, cases, default = a
            table = dict(cases)

            def f(r):
                r[-1] = table.get(r[x], default)
        elif op == "ret":
            slot = cf.ret_slot
            if a:
                x, = a

                def f(r):
                    r[slot] = r[x]
                    r[-1] = -1
            else:
                def f(r):
                    r[-1] = -1
        elif op == "throw":
            x, = a

            def f(r):
                raise _Trap(USER, r[x], idx)
        else:  # pragma: no cover
            raise ValueError(f"bad terminator {op!r}")
        return f


def _compare(op: str, x: int, y: int, d: int) -> Callable:
    if op == "eq":
        def f(r):
            r[d] = 1 if r[x] == r[y] else 0
    elif op == "ne":
        def f(r):
            r[d] = 1 if r[x] != r[y] else 0
    elif op == "lt":
        def f(r):
            r[d] = 1 if r[x] < r[y] else 0
    elif op == "le":
        def f(r):
            r[d] = 1 if r[x] <= r[y] else 0
    elif op == "gt":
        def f(r):
            r[d] = 1 if r[x] > r[y] else 0
    else:
        def f(r):
            r[d] = 1 if r[x] >= r[y] else 0
    return f


def run(program: Program, inputs: Sequence[int] | None, fuel: int | None = None) -> ExecutionResult:
    """Execute ``main(inputs)``; ``inputs=None`` passes a null array."""
    return Interpreter(program).run(inputs, fuel)


def run_with_coverage(program: Program, inputs: Sequence[int] | None,
                      fuel: int | None = None) -> tuple[ExecutionResult, CoverageMap]:
    interp = Interpreter(program)
    result = interp.run(inputs, fuel, coverage=True)
    return result, interp.coverage_map()


def run_traced(program: Program, inputs: Sequence[int] | None,
               fuel: int | None = None) -> tuple[ExecutionResult, list[tuple[str, int]]]:
    """Execute and record every ``(function, block)`` entered, in order."""
    trace: list[tuple[str, int]] = []
    result = Interpreter(program).run(inputs, fuel, trace=trace)
    return result, trace


sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))
