"""Control-flow flattening: every block becomes a case of one dispatcher loop."""
from __future__ import annotations

import random

from ..ir.edit import split_block
from ..ir.model import BOOL, INT, Function, Instr, Program
from .engine import Context, UnsupportedTraps, register

TAG = "dispatcher"


def _aligned(fn: Function) -> bool:
    """Every trap range covers its whole block (after the catch of a handler block)."""
    handlers = fn.handlers()
    for t in fn.traps:
        lo = 1 if t.block in handlers else 0
        if t.start > lo or t.end != len(fn.block(t.block).instrs) + 1:
            return False
    return True


def _next_state(fn: Function, term: Instr, key: dict[int, int], d: int) -> list[Instr]:
    """Instructions computing the successor's case key into ``d``; only the last one writes ``d``."""
    out: list[Instr] = []

    def const(v: int) -> int:
        r = fn.new_reg(INT)
        out.append(Instr("const", r, (v,), TAG))
        return r

    if term.op == "jmp":
        return [Instr("const", d, (key[term.args[0]],), TAG)]
    if term.op == "br":
        c, t, f = term.args
        if fn.reg_types[c] != BOOL:
            z, b = const(0), fn.new_reg(BOOL)
            out.append(Instr("ne", b, (c, z), TAG))
            c = b
        kf, diff, m = const(key[f]), const(key[t] - key[f]), fn.new_reg(INT)
        out.append(Instr("mul", m, (c, diff), TAG))
        out.append(Instr("add", d, (kf, m), TAG))
        return out
    x, cases, default = term.args
    acc = const(key[default])
    for k, target in dict(cases).items():
        hit, kk, step, nxt = fn.new_reg(BOOL), const(k), fn.new_reg(INT), fn.new_reg(INT)
        delta = const(key[target] - key[default])
        out += [Instr("eq", hit, (x, kk), TAG), Instr("mul", step, (hit, delta), TAG),
                Instr("add", nxt, (acc, step), TAG)]
        acc = nxt
    out.append(Instr("move", d, (acc,), TAG))
    return out


def flatten_function(fn: Function, seed: int | str = 0) -> Function:
    """Rewrite ``fn`` in place into a dispatcher loop and return it.

    A handler block keeps only its ``catch`` and hands over to the case that
    holds the rest of its body, so all other original instructions sit in
    exactly one case. Case keys are a seeded permutation starting at a seeded
    offset; ``ret`` and ``throw`` leave the loop unchanged.
    """
    if not _aligned(fn):
        raise UnsupportedTraps(f"{fn.name}: trap range not aligned to block boundaries")
    rng = random.Random(f"flatten:{seed}")
    handlers = fn.handlers()
    bodies = {h: split_block(fn, h, 1) for h in sorted(handlers)}
    cases = [b.id for b in fn.blocks if b.id not in handlers]
    offset = rng.randint(1, 9)
    numbers = list(range(offset, offset + len(cases)))
    rng.shuffle(numbers)
    key = dict(zip(cases, numbers))

    d = fn.new_reg(INT)
    entry = fn.add_block([Instr("const", d, (key[fn.entry],), TAG)], Instr("jmp", None, (0,), TAG))
    head = fn.add_block([], Instr("switch", None, (d, tuple((key[b], b) for b in cases), fn.entry), TAG))
    entry.term = Instr("jmp", None, (head.id,), TAG)
    back = Instr("jmp", None, (head.id,), TAG)

    for h, body in bodies.items():
        blk = fn.block(h)
        blk.instrs.append(Instr("const", d, (key[body],), TAG))
        blk.term = back
    for bid in cases:
        blk = fn.block(bid)
        if blk.term.op in ("jmp", "br", "switch"):
            new = _next_state(fn, blk.term, key, d)
            # ranges reaching the terminator grow over the state update
            for t in fn.traps:
                if t.block == bid and t.end == len(blk.instrs) + 1:
                    t.end += len(new)
            blk.instrs.extend(new)
            blk.term = back
    fn.entry = entry.id
    order = {bid: k for k, bid in enumerate([entry.id, head.id] + cases)}
    fn.blocks.sort(key=lambda b: order.get(b.id, len(order)))
    return fn


def dispatcher_shape(fn: Function):
    """``(header, initial_key, {key: case})`` of a flattened function, or None."""
    entry = fn.block(fn.entry)
    if entry.term.op != "jmp" or not entry.instrs or entry.instrs[-1].op != "const":
        return None
    head = fn.block(entry.term.args[0])
    if head.term.op != "switch" or head.term.args[0] != entry.instrs[-1].dst:
        return None
    return head.id, entry.instrs[-1].args[0], dict(head.term.args[1])


@register("control_flow_flattening")
def control_flow_flattening(ctx: Context, program: Program) -> list[str]:
    sites, refused = [], []
    for fn in ctx.select(program.functions):
        if not _aligned(fn):
            refused.append(fn.name)
            continue
        flatten_function(fn, ctx.seed())
        sites.append(fn.name)
    if refused and not sites:
        raise UnsupportedTraps(f"unaligned trap ranges in {', '.join(refused)}")
    return sites
