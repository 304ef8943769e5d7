"""Building blocks shared by several passes."""
from __future__ import annotations

from .. import opaque
from ..ir.analysis import is_reducible, natural_loops
from ..ir.edit import insert_instrs, split_block
from ..ir.model import ARR, BOOL, INT, VOID, Block, Function, Instr, Program
from .engine import Context


def site(fn: Function, bid: int, index: int | None = None) -> str:
    return f"{fn.name}:b{bid}" if index is None else f"{fn.name}:b{bid}:{index}"


def default_value(fn: Function, typ: str, tag: str = "original") -> tuple[list[Instr], int | None]:
    """Instructions producing the zero value of ``typ`` (nothing for void)."""
    if typ == VOID:
        return [], None
    r = fn.new_reg(typ)
    if typ == ARR:
        return [Instr("null", r, (), tag)], r
    return [Instr("const", r, (0,), tag)], r


def default_return(fn: Function, tag: str = "original") -> tuple[list[Instr], Instr]:
    instrs, r = default_value(fn, fn.ret_type, tag)
    return instrs, Instr("ret", None, () if r is None else (r,), tag)


def predicate(ctx: Context, fn: Function, truth: str, tag: str = "opaque",
              family: str | None = None, source: list[int] | None = None) -> tuple[list[Instr], int]:
    """Materialize an opaque predicate of class ``truth`` fed by a live register of ``fn``."""
    regs = opaque.int_registers(fn) if source is None else source
    pred = opaque.gen_predicate(truth, ctx.seed(), regs, family)
    ctx.note(f"{tag}:{pred.family}")
    return opaque.materialize(pred.template, fn, pred.fresh_inputs, tag, BOOL)


def opaque_value(ctx: Context, fn: Function, value: int, tag: str = "opaque") -> tuple[list[Instr], int]:
    ov = opaque.gen_opaque_value(value, ctx.seed(), opaque.int_registers(fn))
    return opaque.materialize(ov.expression, fn, ov.inputs, tag, INT)


def filler(ctx: Context, fn: Function, tag: str = "dead", n: int | None = None) -> list[Instr]:
    """Plausible arithmetic and output on existing registers; used where it never runs."""
    rng = ctx.rng
    ints = [r for r, t in enumerate(fn.reg_types) if t == INT]
    out: list[Instr] = []
    for _ in range(n if n is not None else rng.randint(2, 4)):
        k = fn.new_reg(INT)
        out.append(Instr("const", k, (rng.randint(-9, 99),), tag))
        kind = rng.randrange(3)
        if ints and kind == 0:
            dst = rng.choice(ints)
            out.append(Instr(rng.choice(("add", "sub", "mul", "xor")), dst, (rng.choice(ints), k), tag))
        elif kind == 1:
            out.append(Instr("print", None, (k,), tag))
        elif ints:
            dst = rng.choice(ints)
            out.append(Instr("move", dst, (k,), tag))
    return out


def boundary_sites(fn: Function) -> list[tuple[int, int]]:
    """(block, index) points where code may be inserted: after any catch, before the terminator."""
    handlers = fn.handlers()
    out = []
    for b in fn.blocks:
        lo = 1 if b.id in handlers else 0
        for i in range(lo, len(b.instrs) + 1):
            out.append((b.id, i))
    return out


def one_site_per_block(ctx: Context, fn: Function) -> list[tuple[int, int]]:
    by_block: dict[int, list[int]] = {}
    for bid, i in boundary_sites(fn):
        by_block.setdefault(bid, []).append(i)
    return [(bid, ctx.rng.choice(idx)) for bid, idx in by_block.items()]


def guard_split(ctx: Context, fn: Function, bid: int, at: int, truth: str) -> tuple[int, int, int]:
    """Split ``bid`` at ``at`` and end the head in an opaque branch.

    Returns ``(head, tail, pred_reg)``; the head's terminator still jumps to
    the tail and is meant to be replaced by the caller.
    """
    tail = split_block(fn, bid, at)
    instrs, p = predicate(ctx, fn, truth)
    append_instrs(fn, bid, instrs)
    return bid, tail, p


def replace_instr(fn: Function, bid: int, index: int, new: list[Instr]) -> None:
    """Replace one non-catch instruction by ``new`` whose last element inherits its trap coverage."""
    blk = fn.block(bid)
    blk.instrs[index] = new[-1]
    if len(new) > 1:
        insert_instrs(fn, bid, index, new[:-1])


def insertion_point(fn: Function, blk: Block) -> int:
    return 1 if blk.id in fn.handlers() else 0


def usable_loops(fn: Function):
    """Natural loops whose header is a normal (non-handler) block with an outside predecessor."""
    handlers = fn.handlers()
    preds = fn.predecessor_map(with_traps=False)
    out = []
    for lp in natural_loops(fn):
        if lp.header in handlers or lp.header == fn.entry:
            continue
        if any(p not in lp.body for p in preds[lp.header]):
            out.append(lp)
    return out


def keeps_reducibility(before: Function, after: Function) -> bool:
    return is_reducible(before) == is_reducible(after)


def snapshot(fn: Function) -> Function:
    return fn.clone()


def restore(fn: Function, saved: Function) -> None:
    fn.__dict__.update(saved.clone().__dict__)


def call_sites(program: Program) -> list[tuple[Function, Block, int]]:
    out = []
    for f in program.functions:
        for b in f.blocks:
            for i, ins in enumerate(b.instrs):
                if ins.op == "call":
                    out.append((f, b, i))
    return out


def covering(fn: Function, bid: int, index: int):
    """Trap entries of ``bid`` covering ``index``, in table order."""
    return [t for t in fn.traps if t.block == bid and t.covers(index)]


def remove_instr(fn: Function, bid: int, index: int) -> Instr:
    """Delete one instruction, shrinking trap ranges; ranges left empty are dropped."""
    blk = fn.block(bid)
    ins = blk.instrs.pop(index)
    keep = []
    for t in fn.traps:
        if t.block == bid:
            if t.start > index:
                t.start -= 1
            if t.end > index:
                t.end -= 1
            if t.start >= t.end:
                continue
        keep.append(t)
    fn.traps = keep
    return ins


def append_instrs(fn: Function, bid: int, instrs: list[Instr]) -> None:
    """Insert before the terminator; ranges covering the terminator grow over them."""
    insert_instrs(fn, bid, len(fn.block(bid).instrs), instrs)
