"""Method-level passes: inlining, outlining, cloning, interleaving and buffer methods."""
from __future__ import annotations


from ..ir.edit import fresh_name, insert_instrs, split_block
from ..ir.model import ARR, BOOL, INT, VOID, Block, Function, Instr, Program, TrapEntry
from ..opaque import CONTEXTUAL
from .common import (
    append_instrs, covering, default_value, predicate, remove_instr, site,
)
from .engine import Context, InterleaveError, RegionError, register


# -- inlining ------------------------------------------------------------------------------------

def inline_call(program: Program, fn: Function, bid: int, index: int) -> None:
    """Replace the call at ``(bid, index)`` of ``fn`` by a copy of the callee body."""
    call = fn.block(bid).instrs[index]
    callee = program.function(call.args[0])
    outer = [(t.handler, t.kinds) for t in covering(fn, bid, index)]
    tail = split_block(fn, bid, index + 1)
    remove_instr(fn, bid, index)

    regmap = {r: fn.new_reg(t) for r, t in enumerate(callee.reg_types)}
    setup: list[Instr] = []
    for p, a in zip(callee.params, call.args[1]):
        setup.append(Instr("move", regmap[p], (a,)))
    for r, t in enumerate(callee.reg_types):
        if r not in callee.params:  # a fresh frame starts from default values
            setup.append(Instr("null", regmap[r], ()) if t == ARR else Instr("const", regmap[r], (0,)))

    next_id = fn.new_block_id()
    bmap = {b.id: next_id + k for k, b in enumerate(callee.blocks)}
    for b in callee.blocks:
        instrs = [i.rename(regmap) for i in b.instrs]
        term = b.term.rename(regmap).retarget(bmap)
        if term.op == "ret":
            if term.args and call.dst is not None:
                instrs.append(Instr("move", call.dst, (term.args[0],), term.tag))
            term = Instr("jmp", None, (tail,), term.tag, term.span)
        fn.blocks.append(Block(bmap[b.id], instrs, term))
    for t in callee.traps:
        fn.traps.append(TrapEntry(bmap[t.block], t.start, t.end, bmap[t.handler], t.kinds))
    # a trap escaping the callee is seen by the caller's handlers of the call site
    for b in callee.blocks:
        n = len(fn.block(bmap[b.id]).instrs) + 1
        for handler, kinds in outer:
            fn.traps.append(TrapEntry(bmap[b.id], 0, n, handler, kinds))
    append_instrs(fn, bid, setup)
    fn.block(bid).term = Instr("jmp", None, (bmap[callee.entry],))


@register("inline_method")
def inline_method(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        cands = [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs)
                 if ins.op == "call" and ins.args[0] != fn.name]
        chosen = ctx.pick(cands, ctx.budget())
        for bid, i in sorted(chosen, key=lambda s: (s[0], -s[1])):
            callee = fn.block(bid).instrs[i].args[0]
            inline_call(program, fn, bid, i)
            sites.append(site(fn, bid, i) + f":{callee}")
    return sites


# -- outlining ----------------------------------------------------------------------------------

def _live_after(fn: Function, blk: Block, end: int, live_out: set[int], live_in) -> set[int]:
    handlers = {t.handler for t in fn.traps if t.block == blk.id}
    live = set(live_out)
    for h in handlers:
        live |= live_in[h]
    for ins in reversed([*blk.instrs[end:], blk.term]):
        live -= set(ins.writes())
        live |= set(ins.reads())
    return live


def outline_region(program: Program, fn: Function | str, bid: int, region: tuple[int, int],
                   name: str | None = None) -> Function:
    """Move ``instrs[i:j]`` of block ``bid`` into a new function and call it in their place.

    Live-in registers become parameters. A single live-out register is
    returned directly; several are returned packed in an int array.
    """
    from ..ir.analysis import liveness
    from ..ir.model import TRAPPING

    if isinstance(fn, str):
        fn = program.function(fn)
    blk = fn.block(bid)
    i, j = region
    if j <= i:
        raise RegionError("empty region", "empty_region")
    if i < 0 or j > len(blk.instrs):
        raise RegionError("region reaches the terminator", "region_contains_terminator")
    body = blk.instrs[i:j]
    if any(x.op == "catch" for x in body):
        raise RegionError("region contains a handler entry", "region_crosses_trap")
    mine = [t for t in fn.traps if t.block == bid]
    for t in mine:
        if i < t.start < j or i < t.end < j:
            raise RegionError("a trap range boundary falls inside the region", "region_crosses_trap")
    if any(x.op in TRAPPING for x in body) and any(t.start < j and i < t.end for t in mine):
        raise RegionError("region may trap under a handler", "region_crosses_trap")

    live_in, live_out = liveness(fn)
    after = _live_after(fn, blk, j, live_out[bid], live_in)
    inputs: list[int] = []
    written: set[int] = set()
    for x in body:
        for r in x.reads():
            if r not in written and r not in inputs:
                inputs.append(r)
        written.update(x.writes())
    outputs = sorted(written & after)
    if len(outputs) > 1 and any(fn.reg_types[r] == ARR for r in outputs):
        raise RegionError("array results cannot be packed", "region_output_unsupported")

    regs: list[str] = []
    rmap: dict[int, int] = {}
    for r in inputs + sorted(written - set(inputs)):
        rmap[r] = len(regs)
        regs.append(fn.reg_types[r])
    instrs = [x.rename(rmap) for x in body]
    if not outputs:
        ret_type, term = VOID, Instr("ret", None, ())
    elif len(outputs) == 1:
        ret_type, term = fn.reg_types[outputs[0]], Instr("ret", None, (rmap[outputs[0]],))
    else:
        ret_type = ARR
        size, res = len(regs), len(regs) + 1
        regs += [INT, ARR]
        instrs += [Instr("const", size, (len(outputs),)), Instr("newarr", res, (size,))]
        for k, r in enumerate(outputs):
            kr = len(regs)
            regs.append(INT)
            instrs += [Instr("const", kr, (k,)), Instr("store", None, (res, kr, rmap[r]))]
        term = Instr("ret", None, (res,))
    name = name or fresh_name([f.name for f in program.functions], f"{fn.name}_part")
    new = Function(name, list(range(len(inputs))), ret_type, regs, [Block(0, instrs, term)], 0, [])

    site_code: list[Instr] = []
    if len(outputs) <= 1:
        site_code.append(Instr("call", outputs[0] if outputs else None, (name, tuple(inputs))))
    else:
        packed = fn.new_reg(ARR)
        site_code.append(Instr("call", packed, (name, tuple(inputs))))
        for k, r in enumerate(outputs):
            kr = fn.new_reg(INT)
            # booleans travel as 0/1 and come back unchanged
            site_code += [Instr("const", kr, (k,)), Instr("load", r, (packed, kr))]
    for _ in range(j - i):
        remove_instr(fn, bid, i)
    insert_instrs(fn, bid, i, site_code)
    program.functions.append(new)
    return new


def _regions(fn: Function, blk: Block) -> list[tuple[int, int]]:
    """Maximal runs of catch-free instructions not cut by trap boundaries."""
    from ..ir.model import TRAPPING

    mine = [t for t in fn.traps if t.block == blk.id]
    cuts = {0, len(blk.instrs)}
    for t in mine:
        cuts.update((t.start, t.end))
    runs, cur = [], []
    for k, ins in enumerate(blk.instrs):
        bad = ins.op == "catch" or (ins.op in TRAPPING and any(t.covers(k) for t in mine))
        if k in cuts or bad:
            if len(cur) >= 2:
                runs.append((cur[0], cur[-1] + 1))
            cur = []
        if not bad:
            cur.append(k)
    if len(cur) >= 2:
        runs.append((cur[0], cur[-1] + 1))
    return runs


@register("outline_method")
def outline_method(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in list(program.functions):
        cands = [(b.id, r) for b in fn.blocks for r in _regions(fn, b)]
        for bid, (lo, hi) in ctx.pick(cands, 1):
            length = ctx.rng.randint(2, min(hi - lo, 6))
            start = ctx.rng.randint(lo, hi - length)
            base = f"{fn.name}_part{ctx.rng.randrange(1000)}"
            name = fresh_name([f.name for f in program.functions], base)
            try:
                outline_region(program, fn, bid, (start, start + length), name)
            except RegionError:
                continue
            sites.append(site(fn, bid, start) + f":{name}")
    return sites


# -- cloning -------------------------------------------------------------------------------------

@register("clone_method")
def clone_method(ctx: Context, program: Program) -> list[str]:
    """Route each chosen call through a contextual predicate to the callee or its clone."""
    sites = []
    clones: dict[str, str] = {}
    for fn in list(program.functions):
        cands = [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs) if ins.op == "call"]
        chosen = ctx.pick(cands, ctx.budget())
        for bid, i in sorted(chosen, key=lambda s: (s[0], -s[1])):
            call = fn.block(bid).instrs[i]
            callee = call.args[0]
            if callee not in clones:
                twin = program.function(callee).clone()
                twin.name = fresh_name([f.name for f in program.functions], f"{callee}_clone")
                program.functions.append(twin)
                clones[callee] = twin.name
            tail = split_block(fn, bid, i + 1)
            first = split_block(fn, bid, i)
            second = fn.add_block(
                [Instr("call", call.dst, (clones[callee], call.args[1]), call.tag, call.span)],
                Instr("jmp", None, (tail,)))
            fn.traps.extend(TrapEntry(second.id, t.start, t.end, t.handler, t.kinds)
                            for t in list(fn.traps) if t.block == first)
            source = [r for r in call.args[1] if fn.reg_types[r] == INT] or None
            instrs, p = predicate(ctx, fn, CONTEXTUAL, source=source)
            append_instrs(fn, bid, instrs)
            fn.block(bid).term = Instr("br", None, (p, first, second.id), "opaque")
            sites.append(site(fn, bid, i) + f":{callee}")
    return sites


# -- interleaving ----------------------------------------------------------------------------------

def _merged_ret(a: str, b: str) -> str | None:
    if a == b:
        return a
    if VOID in (a, b):
        return b if a == VOID else a
    return None


def interleave_functions(program: Program, f: str, g: str, name: str | None = None) -> Function:
    """Merge ``f`` and ``g`` into one function taking a selector first (0 runs f, 1 runs g)."""
    if f == g:
        raise InterleaveError(f"cannot interleave {f} with itself", "self_interleave")
    if program.entry in (f, g):
        raise InterleaveError("the entry function cannot be merged", "entry_function")
    F, G = program.function(f), program.function(g)
    ret = _merged_ret(F.ret_type, G.ret_type)
    if F.param_types() != G.param_types() or ret is None:
        raise InterleaveError(f"{f} and {g} have different signatures", "signature_mismatch")
    regs = [INT] + F.param_types()
    shared = list(range(1, len(regs)))
    blocks: list[Block] = []
    traps: list[TrapEntry] = []
    entries = []
    next_block = 1
    for src in (F, G):
        rmap = dict(zip(src.params, shared))
        for r, t in enumerate(src.reg_types):
            if r not in rmap:
                rmap[r] = len(regs)
                regs.append(t)
        bmap = {b.id: next_block + k for k, b in enumerate(src.blocks)}
        next_block += len(src.blocks)
        for b in src.blocks:
            instrs = [x.rename(rmap) for x in b.instrs]
            term = b.term.rename(rmap).retarget(bmap)
            if term.op == "ret" and not term.args and ret != VOID:
                z = len(regs)
                regs.append(ret)
                instrs.append(Instr("null", z, ()) if ret == ARR else Instr("const", z, (0,)))
                term = Instr("ret", None, (z,), term.tag, term.span)
            blocks.append(Block(bmap[b.id], instrs, term))
        traps += [TrapEntry(bmap[t.block], t.start, t.end, bmap[t.handler], t.kinds) for t in src.traps]
        entries.append(bmap[src.entry])
    zero, test = len(regs), len(regs) + 1
    regs += [INT, BOOL]
    head = Block(0, [Instr("const", zero, (0,), "dispatcher"), Instr("eq", test, (0, zero), "dispatcher")],
                 Instr("br", None, (test, entries[0], entries[1]), "dispatcher"))
    name = name or fresh_name([x.name for x in program.functions], f"{f}_{g}")
    merged = Function(name, [0] + shared, ret, regs, [head] + blocks, 0, traps)
    pos = program.functions.index(F)
    program.functions[pos] = merged
    program.functions.remove(G)
    for fn in program.functions:
        for old, sel in ((f, 0), (g, 1)):
            for b in fn.blocks:
                k = 0
                while k < len(b.instrs):
                    ins = b.instrs[k]
                    if ins.op == "call" and ins.args[0] == old:
                        s = fn.new_reg(INT)
                        b.instrs[k] = Instr("call", ins.dst, (name, (s,) + tuple(ins.args[1])),
                                            ins.tag, ins.span)
                        insert_instrs(fn, b.id, k, [Instr("const", s, (sel,), "dispatcher")])
                        k += 1
                    k += 1
    return merged


@register("interleave_methods")
def interleave_methods(ctx: Context, program: Program) -> list[str]:
    fns = [f for f in program.functions if f.name != program.entry]
    pairs = [(a.name, b.name) for k, a in enumerate(fns) for b in fns[k + 1:]
             if a.param_types() == b.param_types() and _merged_ret(a.ret_type, b.ret_type)]
    if not pairs:
        return []
    f, g = ctx.rng.choice(ctx.select(pairs))
    merged = interleave_functions(program, f, g)
    return [f"{f}+{g}:{merged.name}"]


# -- buffer methods --------------------------------------------------------------------------------

_API = {
    "print": ([INT], VOID),
    "len": ([ARR], INT),
    "min": ([INT, INT], INT),
}


def _buffer(name: str, op: str) -> Function:
    params, ret = _API[op]
    regs = list(params)
    args = tuple(range(len(params)))
    if ret == VOID:
        body = [Instr(op, None, args, "buffer")]
        term = Instr("ret", None, (), "buffer")
    else:
        regs.append(ret)
        body = [Instr(op, len(params), args, "buffer")]
        term = Instr("ret", None, (len(params),), "buffer")
    return Function(name, list(range(len(params))), ret, regs, [Block(0, body, term)], 0, [])


@register("api_buffer_methods", insertion=True)
def api_buffer_methods(ctx: Context, program: Program) -> list[str]:
    """Send intrinsic calls through one generated wrapper per intrinsic."""
    sites = []
    names: dict[str, str] = {}
    taken = [f.name for f in program.functions]
    for fn in list(program.functions):
        cands = [(b.id, i) for b in fn.blocks for i, ins in enumerate(b.instrs) if ins.op in _API]
        for bid, i in ctx.select(cands):
            ins = fn.block(bid).instrs[i]
            if ins.op not in names:
                names[ins.op] = fresh_name(taken + list(names.values()), f"api_{ins.op}")
            fn.block(bid).instrs[i] = Instr("call", ins.dst, (names[ins.op], tuple(ins.args)),
                                            ins.tag, ins.span)
            sites.append(site(fn, bid, i) + f":{ins.op}")
    for op, name in names.items():
        program.functions.append(_buffer(name, op))
    ctx.note("buffer")
    return sites
