"""Loop restructuring passes and the irreducible-flow gadget built on loops."""
from __future__ import annotations

from ..ir.analysis import natural_loops
from ..ir.edit import clone_blocks, redirect, split_block
from ..ir.model import ALL_KINDS, BOOL, INT, Function, Instr, Program, TrapEntry
from ..opaque import ALWAYS_FALSE
from .common import (
    append_instrs, boundary_sites, default_return, predicate, site, usable_loops,
)
from .engine import Context, int_param, register


def _innermost(fn: Function, loops) -> list:
    headers = {lp.header for lp in natural_loops(fn)}
    return [lp for lp in loops if not (lp.body - {lp.header}) & headers]


def _body_order(fn: Function, body: set[int]) -> list[int]:
    return [b.id for b in fn.blocks if b.id in body]


def _entry_preds(fn: Function, lp) -> list[int]:
    preds = fn.predecessor_map(with_traps=False)[lp.header]
    return [p for p in preds if p not in lp.body]


def _counter_block(fn: Function, counter: int, limit: int, stay: int, leave: int, tag: str) -> int:
    """``counter += 1; if counter < limit goto stay else goto leave``."""
    one, lim, c = fn.new_reg(INT), fn.new_reg(INT), fn.new_reg(BOOL)
    blk = fn.add_block(
        [Instr("const", one, (1,), tag), Instr("add", counter, (counter, one), tag),
         Instr("const", lim, (limit,), tag), Instr("lt", c, (counter, lim), tag)],
        Instr("br", None, (c, stay, leave), tag))
    return blk.id


def _preheader(fn: Function, lp, instrs: list[Instr], target: int) -> int:
    """New block running ``instrs`` on every entry into ``lp`` before jumping to ``target``."""
    preds = _entry_preds(fn, lp)
    ph = fn.add_block(instrs, Instr("jmp", None, (target,)))
    for p in preds:
        redirect(fn, p, lp.header, ph.id)
    return ph.id


# -- unrolling -----------------------------------------------------------------------------------

@register("loop_unrolling", params={"unroll_factor": int_param(2, 16)})
def loop_unrolling(ctx: Context, program: Program) -> list[str]:
    """Chain ``unroll_factor`` copies of each chosen innermost loop, each keeping its exit tests.

    Iteration ``k`` runs in copy ``k mod factor``; because every copy keeps
    the loop test, trip counts that are not a multiple of the factor need no
    separate remainder loop.
    """
    factor = ctx.param("unroll_factor", 2)
    sites = []
    for fn in program.functions:
        for lp in ctx.select(_innermost(fn, usable_loops(fn))):
            ids = _body_order(fn, lp.body)
            maps = [{b: b for b in ids}] + [clone_blocks(fn, ids) for _ in range(factor - 1)]
            for k, m in enumerate(maps):
                nxt = maps[(k + 1) % factor][lp.header]
                for latch in lp.latches:
                    redirect(fn, m[latch], m[lp.header], nxt)
            sites.append(site(fn, lp.header) + f":x{factor}")
    return sites


# -- fission -------------------------------------------------------------------------------------

@register("loop_fission", params={"split_after": int_param(1)})
def loop_fission(ctx: Context, program: Program) -> list[str]:
    """Split the iteration space: the first ``split_after`` iterations run in the original loop,
    the rest in a copy that the first loop hands over to."""
    sites = []
    for fn in program.functions:
        for lp in ctx.select(usable_loops(fn)):
            limit = ctx.param("split_after", ctx.rng.randint(1, 3))
            ids = _body_order(fn, lp.body)
            second = clone_blocks(fn, ids)
            cnt = fn.new_reg(INT)
            _preheader(fn, lp, [Instr("const", cnt, (0,))], lp.header)
            step = _counter_block(fn, cnt, limit, lp.header, second[lp.header], "original")
            for latch in lp.latches:
                redirect(fn, latch, lp.header, step)
            sites.append(site(fn, lp.header) + f":{limit}")
    return sites


# -- blocking ------------------------------------------------------------------------------------

@register("loop_blocking", params={"block_size": int_param(1)})
def loop_blocking(ctx: Context, program: Program) -> list[str]:
    """Nest each chosen loop in an outer loop that restarts every ``block_size`` iterations."""
    sites = []
    for fn in program.functions:
        for lp in ctx.select(usable_loops(fn)):
            size = ctx.param("block_size", ctx.rng.randint(2, 4))
            j = fn.new_reg(INT)
            outer = _preheader(fn, lp, [Instr("const", j, (0,))], lp.header)
            step = _counter_block(fn, j, size, lp.header, outer, "original")
            for latch in lp.latches:
                redirect(fn, latch, lp.header, step)
            sites.append(site(fn, lp.header) + f":{size}")
    return sites


# -- dummy loops ---------------------------------------------------------------------------------

def insert_dummy_loop(fn: Function, bid: int, at: int, iterations: int, tag: str = "irrelevant"):
    """Split ``bid`` at ``at`` and run an empty counting loop in between.

    Returns ``(header, body)`` block ids of the new loop.
    """
    tail = split_block(fn, bid, at)
    i, n, one, c = fn.new_reg(INT), fn.new_reg(INT), fn.new_reg(INT), fn.new_reg(BOOL)
    body = fn.add_block([Instr("const", one, (1,), tag), Instr("add", i, (i, one), tag)],
                        Instr("jmp", None, (0,), tag))
    head = fn.add_block([Instr("const", n, (iterations,), tag), Instr("lt", c, (i, n), tag)],
                        Instr("br", None, (c, body.id, tail), tag))
    body.term = Instr("jmp", None, (head.id,), tag)
    append_instrs(fn, bid, [Instr("const", i, (0,), tag)])
    fn.block(bid).term = Instr("jmp", None, (head.id,), tag)
    return head.id, body.id


@register("insert_dummy_loop", insertion=True)
def insert_dummy_loop_pass(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        points = boundary_sites(fn)
        for bid, at in ctx.pick(points, max(1, ctx.budget() // 2)):
            insert_dummy_loop(fn, bid, at, ctx.rng.randint(1, 3))
            sites.append(site(fn, bid, at))
            points = boundary_sites(fn)
            break  # one loop per function keeps later site indices valid
    return sites


# -- irreducibility --------------------------------------------------------------------------------

def _gadget_loop(ctx: Context, fn: Function):
    """A loop with a non-header body block that is a valid jump target, inserting one if needed."""
    handlers = fn.handlers()
    options = []
    for lp in usable_loops(fn):
        body = [b for b in _body_order(fn, lp.body) if b != lp.header and b not in handlers]
        if body:
            options.append((lp, body))
    if options:
        lp, body = ctx.rng.choice(options)
        return lp.header, ctx.rng.choice(body), _entry_preds(fn, lp), lp.latches
    bid, at = ctx.rng.choice(boundary_sites(fn))
    header, body = insert_dummy_loop(fn, bid, at, ctx.rng.randint(1, 2))
    return header, body, [bid], [body]


def make_irreducible(fn: Function, ctx: Context, second_cycle: bool = False) -> int:
    """Give a loop a second entry into its body behind an always-false predicate.

    The edge ``P -> H`` into loop header ``H`` is routed through a new block
    ``G: if (false) goto B else goto H`` with ``B`` a body block other than
    the header, so the loop gets two entries. With ``second_cycle`` a latch
    also gets a guarded edge back to ``G``, closing a second loop that shares
    the body with the first. Returns the id of ``G``.
    """
    header, body, preds, latches = _gadget_loop(ctx, fn)
    instrs, p = predicate(ctx, fn, ALWAYS_FALSE)
    gate = fn.add_block(instrs, Instr("br", None, (p, body, header), "opaque"))
    for pred in preds:
        redirect(fn, pred, header, gate.id)
    if second_cycle:
        latch = ctx.rng.choice(latches)
        instrs, q = predicate(ctx, fn, ALWAYS_FALSE)
        back = fn.add_block(instrs, Instr("br", None, (q, gate.id, header), "opaque"))
        redirect(fn, latch, header, back.id)
    return gate.id


@register("reducible_to_irreducible")
def reducible_to_irreducible(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in ctx.select(program.functions):
        gate = make_irreducible(fn, ctx)
        sites.append(site(fn, gate))
    return sites


@register("intersecting_loops")
def intersecting_loops(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in ctx.select(program.functions):
        gate = make_irreducible(fn, ctx, second_cycle=True)
        sites.append(site(fn, gate))
    return sites


@register("goto_augmentation")
def goto_augmentation(ctx: Context, program: Program) -> list[str]:
    """Cut the block list in two at a seeded point, lay the second part out first, then add the gadget."""
    sites = []
    for fn in ctx.select(program.functions):
        bid, at = ctx.rng.choice(boundary_sites(fn))
        tail = split_block(fn, bid, at)
        cut = next(k for k, b in enumerate(fn.blocks) if b.id == tail)
        fn.blocks = fn.blocks[cut:] + fn.blocks[:cut]
        make_irreducible(fn, ctx)
        sites.append(site(fn, bid, at))
    return sites


@register("basic_block_fission")
def basic_block_fission(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        lo = {b.id: (1 if b.id in fn.handlers() else 0) for b in fn.blocks}
        cands = [b.id for b in fn.blocks if len(b.instrs) - lo[b.id] >= 2]
        chosen = ctx.select(cands)
        if not chosen:
            continue
        for bid in chosen:
            at = ctx.rng.randint(lo[bid] + 1, len(fn.block(bid).instrs) - 1)
            split_block(fn, bid, at)
            sites.append(site(fn, bid, at))
        make_irreducible(fn, ctx)
    return sites


@register("indirect_if")
def indirect_if(ctx: Context, program: Program) -> list[str]:
    """Send both arms of each chosen branch through a goto block kept under a dead handler."""
    sites = []
    for fn in program.functions:
        chosen = ctx.select([b.id for b in fn.blocks if b.term.op == "br"])
        if not chosen:
            continue
        instrs, ret = default_return(fn, "dead")
        e = fn.new_reg(INT)
        handler = fn.add_block([Instr("catch", e, (), "dead")] + instrs, ret)
        for bid in chosen:
            blk = fn.block(bid)
            c, t, f = blk.term.args
            hops = []
            for target in (t, f):
                hop = fn.add_block([], Instr("jmp", None, (target,)))
                fn.traps.append(TrapEntry(hop.id, 0, 1, handler.id, ALL_KINDS))
                hops.append(hop.id)
            blk.term = Instr("br", None, (c, hops[0], hops[1]), blk.term.tag, blk.term.span)
            sites.append(site(fn, bid))
        make_irreducible(fn, ctx)
    ctx.note("dead")
    return sites
