"""In-place editing helpers shared by the passes.

All helpers mutate the function they are given; passes call them on a
private clone. Trap ranges are kept consistent with every edit.
"""
from __future__ import annotations

from .analysis import reachable
from .model import Block, Function, Instr, TrapEntry


def split_block(fn: Function, bid: int, at: int) -> int:
    """Split block ``bid`` before instruction ``at``; return the new tail block id.

    The head keeps ``instrs[:at]`` and jumps to the tail, which receives the
    remaining instructions and the original terminator. Trap entries are cut
    along the same boundary; a head part of a range that reached the old
    terminator also covers the new jump, so block-aligned ranges stay aligned.
    """
    blk = fn.block(bid)
    old_len = len(blk.instrs) + 1
    if not 0 <= at <= len(blk.instrs):
        raise ValueError(f"split index {at} out of range for b{bid}")
    tail = Block(fn.new_block_id(), blk.instrs[at:], blk.term)
    blk.instrs = blk.instrs[:at]
    blk.term = Instr("jmp", None, (tail.id,), "original")
    fn.blocks.insert(fn.blocks.index(blk) + 1, tail)
    traps: list[TrapEntry] = []
    for t in fn.traps:
        if t.block != bid:
            traps.append(t)
            continue
        if t.start < at:
            end = at + 1 if t.end == old_len else min(t.end, at)
            traps.append(TrapEntry(bid, t.start, end, t.handler, t.kinds))
        if t.end > at:
            traps.append(TrapEntry(tail.id, max(t.start, at) - at, t.end - at, t.handler, t.kinds))
    fn.traps = traps
    return tail.id


def insert_instrs(fn: Function, bid: int, pos: int, instrs: list[Instr]) -> None:
    """Insert ``instrs`` before index ``pos`` of block ``bid``.

    A range that strictly straddles ``pos`` grows to cover the insertion;
    ranges starting at or after ``pos`` shift.
    """
    blk = fn.block(bid)
    k = len(instrs)
    blk.instrs[pos:pos] = instrs
    for t in fn.traps:
        if t.block == bid:
            if t.start >= pos:
                t.start += k
            if t.end > pos:
                t.end += k


def guarded(fn: Function, bid: int) -> bool:
    return any(t.block == bid for t in fn.traps)


def clone_blocks(fn: Function, ids: list[int], tag: str | None = None) -> dict[int, int]:
    """Duplicate blocks ``ids`` (appended at the end); return old -> new id map.

    Edges between cloned blocks are redirected to the clones, other edges keep
    their targets. Trap entries of cloned blocks are replicated, pointing at
    cloned handlers when the handler was cloned too. ``tag`` retags every
    copied instruction when given.
    """
    mapping: dict[int, int] = {}
    next_id = fn.new_block_id()
    for b in ids:
        mapping[b] = next_id
        next_id += 1
    for b in ids:
        src = fn.block(b)
        instrs = [i.with_tag(tag) if tag else Instr(i.op, i.dst, i.args, i.tag, i.span)
                  for i in src.instrs]
        term = src.term.retarget(mapping)
        if tag:
            term = term.with_tag(tag)
        fn.blocks.append(Block(mapping[b], instrs, term))
    extra = [TrapEntry(mapping[t.block], t.start, t.end, mapping.get(t.handler, t.handler), t.kinds)
             for t in fn.traps if t.block in mapping]
    fn.traps.extend(extra)
    return mapping


def redirect(fn: Function, src: int, old: int, new: int) -> None:
    """Point every normal edge ``src -> old`` at ``new`` instead."""
    blk = fn.block(src)
    blk.term = blk.term.retarget({old: new})


def remove_unreachable(fn: Function) -> list[int]:
    """Delete blocks unreachable from the entry (trap edges count); return removed ids."""
    live = set(reachable(fn.successor_map(with_traps=True), fn.entry))
    dead = [b.id for b in fn.blocks if b.id not in live]
    if dead:
        fn.blocks = [b for b in fn.blocks if b.id in live]
        fn.traps = [t for t in fn.traps if t.block in live]
    return dead


def renumber(fn: Function) -> dict[int, int]:
    """Renumber blocks to ``0..n-1`` in layout order; return old -> new map."""
    mapping = {b.id: i for i, b in enumerate(fn.blocks)}
    for b in fn.blocks:
        b.id = mapping[b.id]
        b.term = b.term.retarget(mapping)
    fn.entry = mapping[fn.entry]
    for t in fn.traps:
        t.block = mapping[t.block]
        t.handler = mapping[t.handler]
    return mapping


def fresh_name(taken, base: str) -> str:
    names = set(taken)
    if base not in names:
        return base
    k = 1
    while f"{base}_{k}" in names:
        k += 1
    return f"{base}_{k}"


def replace_calls(fn: Function, old: str, build) -> int:
    """Rewrite every ``call old(...)`` via ``build(instr) -> list[Instr]``; return count.

    ``build`` must return exactly one instruction that can trap (the new
    call) so that trap ranges stay aligned; helpers before it are trap-free.
    """
    n = 0
    for b in fn.blocks:
        i = 0
        while i < len(b.instrs):
            ins = b.instrs[i]
            if ins.op == "call" and ins.args[0] == old:
                new = build(ins)
                b.instrs[i:i + 1] = [new[-1]]
                if len(new) > 1:
                    insert_instrs(fn, b.id, i, new[:-1])
                i += len(new)
                n += 1
            else:
                i += 1
    return n
