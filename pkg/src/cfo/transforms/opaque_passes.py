"""Passes built on opaque predicates and values, plus irrelevant code."""
from __future__ import annotations

from ..ir.edit import insert_instrs
from ..ir.model import BOOL, INT, Function, Instr, Program
from ..opaque import ALWAYS_FALSE, ALWAYS_TRUE
from .common import (
    filler, guard_split, one_site_per_block, opaque_value, predicate, site,
)
from .engine import Context, IneligibleSite, PassConfig, register, pass_spec


# -- payload builders, each working on one site ------------------------------------------

def _dead_block(ctx: Context, fn: Function, bid: int, at: int) -> None:
    head, tail, p = guard_split(ctx, fn, bid, at, ALWAYS_FALSE)
    dead = fn.add_block(filler(ctx, fn), Instr("jmp", None, (tail,), "dead"))
    fn.block(head).term = Instr("br", None, (p, dead.id, tail), "opaque")


def _mutated_copy(ctx: Context, fn: Function) -> list[Instr]:
    """Instructions of a random block with one deliberate bug."""
    donors = [b for b in fn.blocks if any(i.op != "catch" for i in b.instrs)]
    if not donors:
        return filler(ctx, fn)
    donor = ctx.rng.choice(donors)
    body = [i.with_tag("dead") for i in donor.instrs if i.op != "catch"]
    swaps = {"add": "sub", "sub": "add", "lt": "le", "le": "lt", "gt": "ge", "ge": "gt",
             "eq": "ne", "ne": "eq", "mul": "add"}
    mutable = [k for k, i in enumerate(body) if i.op == "const" or i.op in swaps]
    if not mutable:
        return body + filler(ctx, fn, n=1)
    k = ctx.rng.choice(mutable)
    ins = body[k]
    if ins.op == "const":
        body[k] = Instr("const", ins.dst, (ins.args[0] + ctx.rng.randint(1, 7),), "dead")
    else:
        body[k] = Instr(swaps[ins.op], ins.dst, ins.args, "dead")
    return body


def _buggy_clone(ctx: Context, fn: Function, bid: int, at: int) -> None:
    body = _mutated_copy(ctx, fn)
    head, tail, p = guard_split(ctx, fn, bid, at, ALWAYS_FALSE)
    dead = fn.add_block(body, Instr("jmp", None, (tail,), "dead"))
    fn.block(head).term = Instr("br", None, (p, dead.id, tail), "opaque")


def _dead_switch(ctx: Context, fn: Function, bid: int, at: int) -> None:
    head, tail, p = guard_split(ctx, fn, bid, at, ALWAYS_FALSE)
    ints = [r for r, t in enumerate(fn.reg_types) if t == INT]
    sel = ctx.rng.choice(ints) if ints else fn.new_reg(INT)
    ncases = ctx.rng.randint(2, 3)
    keys = sorted(ctx.rng.sample(range(-4, 16), ncases))
    arms = [fn.add_block(filler(ctx, fn), Instr("jmp", None, (tail,), "dead")).id
            for _ in range(ncases + 1)]
    sw = fn.add_block([], Instr("switch", None, (sel, tuple(zip(keys, arms[:-1])), arms[-1]), "dead"))
    fn.block(head).term = Instr("br", None, (p, sw.id, tail), "opaque")


def _opaque_branch(ctx: Context, fn: Function, bid: int, at: int) -> None:
    head, tail, p = guard_split(ctx, fn, bid, at, ALWAYS_TRUE)
    live = fn.add_block([], Instr("jmp", None, (tail,), "opaque"))
    dead = fn.add_block(filler(ctx, fn), Instr("jmp", None, (tail,), "dead"))
    fn.block(head).term = Instr("br", None, (p, live.id, dead.id), "opaque")


def _irrelevant(ctx: Context, fn: Function, bid: int, at: int) -> None:
    rng = ctx.rng
    ints = [r for r, t in enumerate(fn.reg_types) if t == INT]
    k = fn.new_reg(INT)
    seq = [Instr("const", k, (rng.randint(1, 64),), "irrelevant")]
    cur = k
    for _ in range(rng.randint(1, 3)):
        src = rng.choice(ints) if ints and rng.random() < 0.7 else cur
        nxt = fn.new_reg(INT)
        seq.append(Instr(rng.choice(("add", "mul", "xor", "sub", "and")), nxt, (cur, src), "irrelevant"))
        cur = nxt
    insert_instrs(fn, bid, at, seq)


def _extend_conditional(ctx: Context, fn: Function, bid: int, form: str) -> None:
    blk = fn.block(bid)
    c, t, f = blk.term.args
    extra: list[Instr] = []
    if fn.reg_types[c] != BOOL:
        z, nz = fn.new_reg(INT), fn.new_reg(BOOL)
        extra += [Instr("const", z, (0,), "opaque"), Instr("ne", nz, (c, z), "opaque")]
        c = nz
    truth = ALWAYS_TRUE if form == "and" else ALWAYS_FALSE
    instrs, p = predicate(ctx, fn, truth)
    extra += instrs
    if form == "and_not":
        q = fn.new_reg(BOOL)
        extra.append(Instr("not", q, (p,), "opaque"))
        p, form = q, "and"
    res = fn.new_reg(BOOL)
    extra.append(Instr(form, res, (c, p), "opaque"))
    blk.instrs.extend(extra)
    blk.term = Instr("br", None, (res, t, f), blk.term.tag, blk.term.span)


_REDUNDANT_SOURCES = ("add", "sub", "mul", "div", "rem", "neg", "min", "and", "or", "xor", "const", "move")
_IDENTITIES = (("mul", 1), ("add", 0), ("sub", 0), ("xor", 0), ("or", 0))


def _redundant_operand(ctx: Context, fn: Function, bid: int, index: int, identity=None) -> None:
    blk = fn.block(bid)
    ins = blk.instrs[index]
    op, unit = identity or ctx.rng.choice(_IDENTITIES)
    tmp = fn.new_reg(INT)
    blk.instrs[index] = Instr(ins.op, tmp, ins.args, ins.tag, ins.span)
    vals, v = opaque_value(ctx, fn, unit)
    insert_instrs(fn, bid, index + 1, vals + [Instr(op, ins.dst, (tmp, v), "opaque")])


def _redundant_sites(fn: Function) -> list[tuple[int, int]]:
    return [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs)
            if ins.op in _REDUNDANT_SOURCES and fn.reg_types[ins.dst] == INT]


# -- passes ----------------------------------------------------------------------------------

def _insert_at_boundaries(ctx: Context, program: Program, build) -> list[str]:
    sites = []
    for fn in program.functions:
        chosen = ctx.pick(one_site_per_block(ctx, fn), ctx.budget())
        for bid, at in chosen:
            build(ctx, fn, bid, at)
            sites.append(site(fn, bid, at))
    return sites


_DEAD_BUILDERS = {"plain": _dead_block, "buggy_code": _buggy_clone, "dead_switch": _dead_switch}


@register("dead_code_insertion", variants=("plain", "buggy_code", "dead_switch"), insertion=True)
def dead_code_insertion(ctx: Context, program: Program) -> list[str]:
    ctx.note("dead")
    return _insert_at_boundaries(ctx, program, _DEAD_BUILDERS[ctx.variant or "plain"])


@register("opaque_branch_insertion", insertion=True)
def opaque_branch_insertion(ctx: Context, program: Program) -> list[str]:
    ctx.note("dead")
    return _insert_at_boundaries(ctx, program, _opaque_branch)


@register("irrelevant_code_insertion", insertion=True)
def irrelevant_code_insertion(ctx: Context, program: Program) -> list[str]:
    ctx.note("irrelevant")
    return _insert_at_boundaries(ctx, program, _irrelevant)


@register("extend_conditionals", insertion=True)
def extend_conditionals(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        branches = [b.id for b in fn.blocks if b.term.op == "br"]
        for bid in ctx.pick(branches, 2 * ctx.budget()):
            _extend_conditional(ctx, fn, bid, ctx.rng.choice(("and", "or", "and_not")))
            sites.append(site(fn, bid))
    return sites


@register("add_redundant_operands", insertion=True)
def add_redundant_operands(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        chosen = ctx.pick(_redundant_sites(fn), 2 * ctx.budget())
        # right to left so earlier indices stay valid
        for bid, i in sorted(chosen, key=lambda s: (s[0], -s[1])):
            _redundant_operand(ctx, fn, bid, i)
            sites.append(site(fn, bid, i))
    return sites


# -- public single-site entry point ------------------------------------------------------------

_KIND_PASS = {
    "dead_block": "dead_code_insertion", "dead_switch": "dead_code_insertion:dead_switch",
    "buggy_clone": "dead_code_insertion:buggy_code", "irrelevant": "irrelevant_code_insertion",
    "extend_conditional": "extend_conditionals", "redundant_operand": "add_redundant_operands",
    "opaque_branch": "opaque_branch_insertion",
}


def insert_opaque_guard(fn: Function, site_at: tuple[int, int], truth: str, payload_kind: str,
                        seed: int = 0) -> Function:
    """Insert one opaque payload into ``fn`` (edited in place and returned).

    ``site_at`` is ``(block, index)``: an instruction boundary for the
    insertion kinds, the instruction for ``redundant_operand`` and the
    branching block (index ignored) for ``extend_conditional``.
    """
    if payload_kind not in _KIND_PASS:
        raise IneligibleSite(f"unknown payload kind {payload_kind!r}")
    pid = _KIND_PASS[payload_kind]
    spec = pass_spec(pid)
    ctx = Context(spec, pid, pid.partition(":")[2] or None, PassConfig(seed=seed))
    bid, at = site_at
    try:
        blk = fn.block(bid)
    except KeyError:
        raise IneligibleSite(f"no block b{bid}") from None
    if payload_kind in ("dead_block", "dead_switch", "buggy_clone") and truth != ALWAYS_FALSE:
        raise IneligibleSite("dead payloads need an always-false guard")
    if payload_kind == "opaque_branch" and truth != ALWAYS_TRUE:
        raise IneligibleSite("opaque branches need an always-true guard")
    if payload_kind == "extend_conditional":
        if blk.term.op != "br":
            raise IneligibleSite("block does not end in a conditional branch")
        _extend_conditional(ctx, fn, bid, "and" if truth == ALWAYS_TRUE else "and_not")
        return fn
    if payload_kind == "redundant_operand":
        if (bid, at) not in _redundant_sites(fn):
            raise IneligibleSite("not an integer-valued instruction")
        _redundant_operand(ctx, fn, bid, at, ("mul", 1))
        return fn
    lo = 1 if bid in fn.handlers() else 0
    if not lo <= at <= len(blk.instrs):
        raise IneligibleSite(f"index {at} is not an insertion point of b{bid}")
    builders = {"dead_block": _dead_block, "dead_switch": _dead_switch, "buggy_clone": _buggy_clone,
                "irrelevant": _irrelevant, "opaque_branch": _opaque_branch}
    builders[payload_kind](ctx, fn, bid, at)
    return fn
