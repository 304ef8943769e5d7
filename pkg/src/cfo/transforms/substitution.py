"""Instruction-level substitutions: equivalent sequences, idiom wrappers, guards to traps, split booleans."""
from __future__ import annotations

from ..ir.analysis import is_reducible, liveness
from ..ir.edit import fresh_name, insert_instrs, split_block
from ..ir.model import (
    BOOL, EFFECTFUL, INT, NULL_ACCESS, TRAPPING, Block, Function, Instr, Program, TrapEntry,
)
from .common import (
    append_instrs, filler, remove_instr, replace_instr, restore, site, snapshot,
)
from .engine import Context, register


def _substitute(fn: Function, ins: Instr) -> list[Instr] | None:
    """Equivalent sequence for ``ins`` (last element writes the original destination)."""
    op, d, a = ins.op, ins.dst, ins.args

    def const(v: int) -> tuple[int, Instr]:
        r = fn.new_reg(INT)
        return r, Instr("const", r, (v,))

    if op == "sub":  # a - b == a + (0 - b)
        z, cz = const(0)
        nb = fn.new_reg(INT)
        return [cz, Instr("sub", nb, (z, a[1])), Instr("add", d, (a[0], nb), ins.tag, ins.span)]
    if op == "add":  # a + b == a - (0 - b)
        z, cz = const(0)
        nb = fn.new_reg(INT)
        return [cz, Instr("sub", nb, (z, a[1])), Instr("sub", d, (a[0], nb), ins.tag, ins.span)]
    if op == "move" and fn.reg_types[d] in (INT, BOOL):  # r = a + 0
        z, cz = const(0)
        return [cz, Instr("add", d, (a[0], z), ins.tag, ins.span)]
    if op == "neg":  # -a == 0 - a
        z, cz = const(0)
        return [cz, Instr("sub", d, (z, a[0]), ins.tag, ins.span)]
    if op == "not" and fn.reg_types[a[0]] == BOOL:  # !c == c ^ 1
        one, c1 = const(1)
        return [c1, Instr("xor", d, (a[0], one), ins.tag, ins.span)]
    return None


_SUBSTITUTABLE = ("sub", "add", "move", "neg", "not")


@register("instruction_substitution", variants=("plain", "replacing_goto"))
def instruction_substitution(ctx: Context, program: Program) -> list[str]:
    if ctx.variant == "replacing_goto":
        return _replace_gotos(ctx, program)
    sites = []
    for fn in program.functions:
        cands = [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs)
                 if ins.op in _SUBSTITUTABLE]
        for bid, i in sorted(ctx.select(cands), key=lambda s: (s[0], -s[1])):
            new = _substitute(fn, fn.block(bid).instrs[i])
            if new is not None:
                replace_instr(fn, bid, i, new)
                sites.append(site(fn, bid, i))
    return sites


def _replace_gotos(ctx: Context, program: Program) -> list[str]:
    """``jmp L`` becomes ``r = 0; if (r == 0) goto L else goto L'`` with a dead ``L'``."""
    sites = []
    for fn in program.functions:
        jumps = [b.id for b in fn.blocks if b.term.op == "jmp"]
        for bid in ctx.pick(jumps, 2 * ctx.budget()):
            blk = fn.block(bid)
            target = blk.term.args[0]
            r, z, c = fn.new_reg(INT), fn.new_reg(INT), fn.new_reg(BOOL)
            append_instrs(fn, bid, [Instr("const", r, (0,)), Instr("const", z, (0,)),
                                    Instr("eq", c, (r, z))])
            dead = fn.add_block(filler(ctx, fn), Instr("jmp", None, (target,), "dead"))
            blk.term = Instr("br", None, (c, target, dead.id), blk.term.tag, blk.term.span)
            sites.append(site(fn, bid))
    ctx.note("dead")
    return sites


# -- library idioms -----------------------------------------------------------------------------

def _idiom_min(name: str) -> Function:
    """``min`` spelled out as a compare and branch."""
    # regs: 0 a, 1 b, 2 lt flag
    blocks = [
        Block(0, [Instr("lt", 2, (0, 1))], Instr("br", None, (2, 1, 2))),
        Block(1, [], Instr("ret", None, (0,))),
        Block(2, [], Instr("ret", None, (1,))),
    ]
    return Function(name, [0, 1], INT, [INT, INT, BOOL], blocks, 0, [])


@register("remove_library_idioms")
def remove_library_idioms(ctx: Context, program: Program) -> list[str]:
    sites = []
    name = fresh_name([f.name for f in program.functions], "idiom_min")
    for fn in program.functions:
        cands = [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs) if ins.op == "min"]
        for bid, i in ctx.select(cands):
            ins = fn.block(bid).instrs[i]
            fn.block(bid).instrs[i] = Instr("call", ins.dst, (name, ins.args), ins.tag, ins.span)
            sites.append(site(fn, bid, i))
    if sites:
        program.functions.append(_idiom_min(name))
    return sites


# -- null guards to traps -----------------------------------------------------------------------

def _single_use(fn: Function, reg: int, where: tuple[int, int]) -> bool:
    """``reg`` is written once and read only by the terminator of block ``where[0]``."""
    writes = reads = 0
    for b in fn.blocks:
        for ins in b.instrs + [b.term]:
            writes += reg in ins.writes()
            if reg in ins.reads():
                reads += 1
                if ins is not b.term or b.id != where[0]:
                    return False
    return writes == 1 and reads == 1


def _guard_site(fn: Function, blk: Block, live_in) -> tuple | None:
    if blk.term.op != "br" or not blk.instrs:
        return None
    c, on_null, on_value = blk.term.args
    test = blk.instrs[-1]
    if test.op != "isnull" or test.dst != c or on_null == on_value:
        return None
    if not _single_use(fn, c, (blk.id, len(blk.instrs))):
        return None
    arr = test.args[0]
    if on_value in fn.handlers() or on_value == blk.id:
        return None
    if fn.predecessor_map(with_traps=True)[on_value] != [blk.id]:
        return None
    body = fn.block(on_value)
    for k, ins in enumerate(body.instrs):
        if ins.op in TRAPPING or ins.op in EFFECTFUL:
            if ins.op in ("len", "load", "store") and ins.args[0] == arr:
                clobbered = {r for x in body.instrs[:k] for r in x.writes()}
                if arr in clobbered or clobbered & live_in[on_null]:
                    return None
                return on_null, on_value, k
            return None
    return None


@register("guard_to_trap")
def guard_to_trap(ctx: Context, program: Program) -> list[str]:
    """Drop an explicit ``== null`` test and let the first array use trap into the null path."""
    sites = []
    for fn in program.functions:
        live_in, _ = liveness(fn)
        cands = [b.id for b in fn.blocks if _guard_site(fn, b, live_in) is not None]
        for bid in ctx.select(cands):
            live_in, _ = liveness(fn)
            found = _guard_site(fn, fn.block(bid), live_in)
            if found is None:
                continue
            saved, was = snapshot(fn), is_reducible(fn)
            on_null, on_value, k = found
            blk = fn.block(bid)
            remove_instr(fn, bid, len(blk.instrs) - 1)
            blk.term = Instr("jmp", None, (on_value,), blk.term.tag, blk.term.span)
            use = split_block(fn, on_value, k) if k else on_value
            split_block(fn, use, 1)
            e = fn.new_reg(INT)
            handler = fn.add_block([Instr("catch", e, ())], Instr("jmp", None, (on_null,)))
            fn.traps.insert(0, TrapEntry(use, 0, 2, handler.id, frozenset({NULL_ACCESS})))
            if is_reducible(fn) != was:
                restore(fn, saved)
                continue
            sites.append(site(fn, bid))
    return sites


# -- boolean splitting ----------------------------------------------------------------------------

def _split_boolean(ctx: Context, fn: Function, b: int, one: int) -> None:
    s1, s2 = fn.new_reg(BOOL), fn.new_reg(BOOL)
    ints = [r for r, t in enumerate(fn.reg_types) if t == INT and r != one]
    mixer = ctx.rng.choice(ints) if ints else one

    def shares_of(value: int) -> list[Instr]:
        return [Instr("and", s1, (mixer, one), "opaque"), Instr("xor", s2, (value, s1), "opaque")]

    for blk in fn.blocks:
        if b in blk.term.reads():
            t = fn.new_reg(BOOL)
            append_instrs(fn, blk.id, [Instr("xor", t, (s1, s2), "opaque")])
            blk.term = blk.term.rename({b: t})
        for i in range(len(blk.instrs) - 1, -1, -1):
            ins = blk.instrs[i]
            reads, writes = b in ins.reads(), b in ins.writes()
            if not (reads or writes):
                continue
            new = ins
            if writes:
                tmp = fn.new_reg(BOOL)
                new = Instr(new.op, tmp, new.args, new.tag, new.span)
                insert_instrs(fn, blk.id, i + 1, shares_of(tmp))
            if reads:
                t = fn.new_reg(BOOL)
                new = Instr(new.op, new.dst, new.rename({b: t}).args, new.tag, new.span)
                blk.instrs[i] = new
                insert_instrs(fn, blk.id, i, [Instr("xor", t, (s1, s2), "opaque")])
            else:
                blk.instrs[i] = new
    if b in fn.params:
        insert_instrs(fn, fn.entry, 0, shares_of(b))


@register("boolean_splitter")
def boolean_splitter(ctx: Context, program: Program) -> list[str]:
    """Store each chosen boolean as two shares ``s1, s2`` with value ``s1 ^ s2``."""
    sites = []
    for fn in program.functions:
        used = sorted({r for _, _, ins in fn.instructions() for r in ins.reads()
                       if fn.reg_types[r] == BOOL})
        chosen = ctx.pick(used, 2 * ctx.budget())
        if not chosen:
            continue
        one = fn.new_reg(INT)
        for b in chosen:
            _split_boolean(ctx, fn, b, one)
            sites.append(f"{fn.name}:%{b}")
        # ahead of every share update, parameter shares included
        insert_instrs(fn, fn.entry, 0, [Instr("const", one, (1,), "opaque")])
    return sites
