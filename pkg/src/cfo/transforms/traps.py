"""Passes that rewrite the trap table: partial switch ranges and handler layout/merging."""
from __future__ import annotations

from ..ir.analysis import is_reducible
from ..ir.edit import insert_instrs
from ..ir.model import ALL_KINDS, INT, TRAPPING, Function, Instr, Program, TrapEntry
from .common import default_return, restore, site, snapshot
from .engine import Context, register


def _dead_handler(fn: Function) -> int:
    instrs, ret = default_return(fn, "dead")
    e = fn.new_reg(INT)
    return fn.add_block([Instr("catch", e, (), "dead")] + instrs, ret).id


@register("partially_trapping_switch")
def partially_trapping_switch(ctx: Context, program: Program) -> list[str]:
    """Cover the tail of each chosen switch block, but not its head, with one dead handler.

    A fresh constant is placed at the head so the range never starts at the
    block boundary; the range only spans instructions that cannot trap, so
    the handler is never entered and existing handlers keep their faults.
    """
    sites = []
    for fn in program.functions:
        chosen = ctx.select([b.id for b in fn.blocks if b.term.op == "switch"])
        if not chosen:
            continue
        handler = _dead_handler(fn)
        for bid in chosen:
            blk = fn.block(bid)
            lo = 1 if bid in fn.handlers() else 0
            k = fn.new_reg(INT)
            insert_instrs(fn, bid, lo, [Instr("const", k, (ctx.rng.randint(0, 99),), "irrelevant")])
            start = lo + 1
            for i in range(len(blk.instrs) - 1, lo, -1):
                if blk.instrs[i].op in TRAPPING:
                    start = i + 1
                    break
            fn.traps.insert(0, TrapEntry(bid, start, len(blk.instrs) + 1, handler, ALL_KINDS))
            sites.append(site(fn, bid, start))
    ctx.note("dead")
    return sites


def _merge_handlers(fn: Function) -> int:
    """Point entries at the first of any structurally identical handlers; returns merges done."""
    seen: dict[tuple, int] = {}
    alias: dict[int, int] = {}
    for b in fn.blocks:
        if b.id not in fn.handlers():
            continue
        key = (tuple((i.op, i.dst, i.args) for i in b.instrs), (b.term.op, b.term.args))
        if key in seen:
            alias[b.id] = seen[key]
        else:
            seen[key] = b.id
    for t in fn.traps:
        t.handler = alias.get(t.handler, t.handler)
    if alias:
        fn.blocks = [b for b in fn.blocks if b.id not in alias or b.id in fn.handlers()]
    return len(alias)


def _merge_adjacent(fn: Function) -> int:
    """Fuse consecutive table entries with touching ranges and identical handler and kinds."""
    out: list[TrapEntry] = []
    merged = 0
    for t in fn.traps:
        prev = out[-1] if out else None
        if (prev is not None and prev.block == t.block and prev.handler == t.handler
                and prev.kinds == t.kinds and prev.end == t.start):
            prev.end = t.end
            merged += 1
        else:
            out.append(t)
    fn.traps = out
    return merged


def _handlers_first(fn: Function) -> bool:
    """Lay each handler out right before the first block it protects."""
    before = [b.id for b in fn.blocks]
    for h in sorted(fn.handlers()):
        protected = {t.block for t in fn.traps if t.handler == h} - {h}
        if not protected:
            continue
        hb = fn.block(h)
        rest = [b for b in fn.blocks if b.id != h]
        at = next(k for k, b in enumerate(rest) if b.id in protected)
        if rest[at].id == fn.entry:
            at += 1  # keep the entry block first
        fn.blocks = rest[:at] + [hb] + rest[at:]
    return [b.id for b in fn.blocks] != before


@register("combine_try_catch")
def combine_try_catch(ctx: Context, program: Program) -> list[str]:
    """Move handlers next to (ahead of) their protected code and fold duplicate handlers and entries."""
    sites = []
    for fn in ctx.select([f for f in program.functions if f.traps]):
        saved, was = snapshot(fn), is_reducible(fn)
        changed = _merge_handlers(fn) + _merge_adjacent(fn)
        if is_reducible(fn) != was:
            restore(fn, saved)
            changed = 0
        if _handlers_first(fn) or changed:
            sites.append(fn.name)
    return sites
