"""Passes that change evaluation order or layout while preserving dependencies."""
from __future__ import annotations

from collections import Counter

from ..ir.analysis import def_use, is_reducible
from ..ir.edit import guarded, split_block
from ..ir.model import BOOL, COMPARE_OPS, INT, Function, Instr, Program
from .common import append_instrs, remove_instr, restore, site, snapshot, usable_loops
from .engine import Context, register

_COMMUTATIVE = ("add", "mul", "and", "or", "xor", "eq", "ne", "min")
_MIRROR = {"lt": "gt", "gt": "lt", "le": "ge", "ge": "le"}


@register("reorder_expressions", variants=("plain", "branch_inversion"))
def reorder_expressions(ctx: Context, program: Program) -> list[str]:
    if ctx.variant == "branch_inversion":
        return _branch_inversion(ctx, program)
    sites = []
    for fn in program.functions:
        cands = [(b, i) for b in fn.blocks for i, ins in enumerate(b.instrs)
                 if (ins.op in _COMMUTATIVE or ins.op in _MIRROR) and ins.args[0] != ins.args[1]]
        for b, i in ctx.select(cands):
            ins = b.instrs[i]
            op = _MIRROR.get(ins.op, ins.op)
            b.instrs[i] = Instr(op, ins.dst, (ins.args[1], ins.args[0]), ins.tag, ins.span)
            sites.append(site(fn, b.id, i))
    return sites


def _branch_inversion(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in program.functions:
        for bid in ctx.select([b.id for b in fn.blocks if b.term.op == "br"]):
            blk = fn.block(bid)
            c, t, f = blk.term.args
            n = fn.new_reg(BOOL)
            if fn.reg_types[c] == BOOL:
                extra = [Instr("not", n, (c,))]
            else:
                z = fn.new_reg(INT)
                extra = [Instr("const", z, (0,)), Instr("eq", n, (c, z))]
            append_instrs(fn, bid, extra)
            blk.term = Instr("br", None, (n, f, t), blk.term.tag, blk.term.span)
            sites.append(site(fn, bid))
    return sites


# -- statements -------------------------------------------------------------------------------

def _aligned(fn: Function, bid: int) -> bool:
    n = len(fn.block(bid).instrs) + 1
    return all((t.start, t.end) == (0, n) for t in fn.traps if t.block == bid)


def random_topological_order(n: int, edges: set[tuple[int, int]], rng) -> list[int]:
    indeg = [0] * n
    succ: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in edges:
        succ[i].append(j)
        indeg[j] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    order = []
    while ready:
        k = ready.pop(rng.randrange(len(ready)))
        order.append(k)
        for j in succ[k]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    return order


def _has_independent_pair(n: int, edges: set[tuple[int, int]]) -> bool:
    # in a total order every adjacent pair is directly constrained
    return any((i, i + 1) not in edges for i in range(n - 1))


@register("reorder_statements")
def reorder_statements(ctx: Context, program: Program) -> list[str]:
    sites = []
    fallback = None
    for fn in program.functions:
        for b in ctx.select(fn.blocks):
            if len(b.instrs) < 2 or not _aligned(fn, b.id):
                continue
            edges = def_use(b, guarded=guarded(fn, b.id))
            if not _has_independent_pair(len(b.instrs), edges):
                continue
            order = random_topological_order(len(b.instrs), edges, ctx.rng)
            if order == list(range(len(b.instrs))):
                fallback = fallback or (fn, b, edges)
                continue
            b.instrs = [b.instrs[k] for k in order]
            sites.append(site(fn, b.id))
    if not sites and fallback is not None:
        # force one visible change: swap the first unconstrained adjacent pair
        fn, b, edges = fallback
        i = next(i for i in range(len(b.instrs) - 1) if (i, i + 1) not in edges)
        b.instrs[i], b.instrs[i + 1] = b.instrs[i + 1], b.instrs[i]
        sites.append(site(fn, b.id))
    return sites


# -- layout ---------------------------------------------------------------------------------

@register("reorder_blocks")
def reorder_blocks(ctx: Context, program: Program) -> list[str]:
    sites = []
    for fn in ctx.select(program.functions):
        if len(fn.blocks) < 3:
            continue
        entry = fn.block(fn.entry)
        rest = [b for b in fn.blocks if b is not entry]
        shuffled = list(rest)
        for _ in range(8):
            ctx.rng.shuffle(shuffled)
            if shuffled != rest:
                break
        else:
            shuffled = rest[1:] + rest[:1]
        fn.blocks = [entry] + shuffled
        sites.append(site(fn, fn.entry))
    return sites


@register("method_reordering")
def method_reordering(ctx: Context, program: Program) -> list[str]:
    if len(program.functions) < 2:
        return []
    ctx.rng.shuffle(program.functions)
    return [",".join(f.name for f in program.functions)]


# -- loop index evaluation --------------------------------------------------------------------

_SAFE = 1 << 62


def _counted_header(fn: Function, lp):
    blk = fn.block(lp.header)
    if blk.term.op != "br" or not blk.instrs:
        return None
    last = blk.instrs[-1]
    if last.op not in _MIRROR or last.dst != blk.term.args[0]:
        return None
    if last.dst in last.args:
        return None
    return blk


@register("reorder_loops")
def reorder_loops(ctx: Context, program: Program) -> list[str]:
    """Evaluate loop tests through the remaining distance ``k = n - i`` instead of ``i``.

    ``i < n`` becomes ``n - i > 0``. That is exact only while the subtraction
    cannot wrap, so each header checks that both operands lie in
    ``[-2^62, 2^62)`` and falls back to the original comparison otherwise.
    """
    sites = []
    for fn in program.functions:
        headers = [b for lp in usable_loops(fn) if (b := _counted_header(fn, lp)) is not None]
        for blk in ctx.select(headers):
            cmp = remove_instr(fn, blk.id, len(blk.instrs) - 1)
            i, n = cmp.args
            c = cmp.dst
            _, t, f = blk.term.args
            lo, hi = fn.new_reg(INT), fn.new_reg(INT)
            oks = [fn.new_reg(BOOL) for _ in range(6)]
            guard = [
                Instr("const", lo, (-_SAFE,)), Instr("const", hi, (_SAFE,)),
                Instr("ge", oks[0], (i, lo)), Instr("lt", oks[1], (i, hi)),
                Instr("ge", oks[2], (n, lo)), Instr("lt", oks[3], (n, hi)),
                Instr("and", oks[4], (oks[0], oks[1])), Instr("and", oks[5], (oks[2], oks[3])),
            ]
            safe = fn.new_reg(BOOL)
            guard.append(Instr("and", safe, (oks[4], oks[5])))
            append_instrs(fn, blk.id, guard)
            k, z = fn.new_reg(INT), fn.new_reg(INT)
            fast = fn.add_block(
                [Instr("sub", k, (n, i)), Instr("const", z, (0,)),
                 Instr(_MIRROR[cmp.op], c, (k, z), cmp.tag, cmp.span)],
                Instr("br", None, (c, t, f)))
            slow = fn.add_block([cmp], Instr("br", None, (c, t, f)))
            blk.term = Instr("br", None, (safe, fast.id, slow.id))
            sites.append(site(fn, blk.id))
    return sites


# -- duplicate sequences ----------------------------------------------------------------------

def _key(ins: Instr):
    return (ins.op, ins.dst, ins.args)


def _profitable(length: int, occ: int) -> bool:
    # shared copy + dispatch vs. occ inline copies, each leaving a selector write and a jump
    return length + 1 + occ * (2 - length) <= 0


def _find_duplicates(fn: Function, banned: set) -> tuple[int, list[tuple[int, int]]] | None:
    cands = [b for b in fn.blocks if not guarded(fn, b.id)]
    best = None
    longest = max((len(b.instrs) for b in cands), default=0)
    for length in range(longest, 3, -1):
        windows: dict[tuple, list[tuple[int, int]]] = {}
        for b in cands:
            for i in range(len(b.instrs) - length + 1):
                seq = b.instrs[i:i + length]
                if any(x.op == "catch" for x in seq):
                    continue
                windows.setdefault(tuple(_key(x) for x in seq), []).append((b.id, i))
        for key, occs in windows.items():
            if key in banned:
                continue
            chosen: list[tuple[int, int]] = []
            for bid, i in occs:  # greedy, non-overlapping within a block
                if chosen and chosen[-1][0] == bid and i < chosen[-1][1] + length:
                    continue
                chosen.append((bid, i))
            if len(chosen) >= 2 and _profitable(length, len(chosen)):
                saving = length * len(chosen) - (length + 1 + 2 * len(chosen))
                if best is None or saving > best[0]:
                    best = (saving, length, chosen, key)
        if best is not None:
            break
    if best is None:
        return None
    return best[1], best[2], best[3]


@register("duplicate_sequence_reuse")
def duplicate_sequence_reuse(ctx: Context, program: Program) -> list[str]:
    """Replace repeated instruction runs by one shared copy ending in a switch on a return selector.

    Only groups that do not grow the code are rewritten, and only in blocks
    without trap coverage, so the shared copy needs no handler.
    """
    sites = []
    for fn in ctx.select(program.functions):
        banned: set = set()
        for _ in range(ctx.budget()):
            found = _find_duplicates(fn, banned)
            if found is None:
                break
            length, occs, key = found
            saved = snapshot(fn)
            was_reducible = is_reducible(fn)
            template = [Instr(x.op, x.dst, x.args, x.tag, x.span)
                        for x in fn.block(occs[0][0]).instrs[occs[0][1]:occs[0][1] + length]]
            sel = fn.new_reg(INT)
            shared = fn.add_block(template, Instr("ret", None, ()))  # terminator set below
            tails = []
            for k, (bid, i) in sorted(enumerate(occs), key=lambda e: (e[1][0], -e[1][1])):
                tail = split_block(fn, bid, i + length)
                blk = fn.block(bid)
                blk.instrs = blk.instrs[:i] + [Instr("const", sel, (k,), "dispatcher")]
                blk.term = Instr("jmp", None, (shared.id,))
                tails.append((k, tail))
            tails.sort()
            cases = tuple((k, t) for k, t in tails[:-1])
            shared.term = Instr("switch", None, (sel, cases, tails[-1][1]), "dispatcher")
            if is_reducible(fn) != was_reducible:
                restore(fn, saved)
                banned.add(key)
                continue
            sites.append(site(fn, shared.id) + f":x{len(occs)}")
    return sites


# -- hoisting -----------------------------------------------------------------------------------

def _locals(fn: Function) -> set[int]:
    """Registers written exactly once, and read only in the block that writes them."""
    writes: Counter = Counter()
    home: dict[int, int] = {}
    readers: dict[int, set[int]] = {}
    for b in fn.blocks:
        for ins in b.instrs + [b.term]:
            for r in ins.writes():
                writes[r] += 1
                home[r] = b.id
            for r in ins.reads():
                readers.setdefault(r, set()).add(b.id)
    params = set(fn.params)
    return {r for r, n in writes.items()
            if n == 1 and r not in params and readers.get(r, set()) <= {home[r]}}


@register("hoist_common_branch_code")
def hoist_common_branch_code(ctx: Context, program: Program) -> list[str]:
    """Move identical leading instructions of both branch targets above the branch."""
    from ..ir.model import TRAPPING

    sites = []
    for fn in program.functions:
        preds = fn.predecessor_map(with_traps=True)
        handlers = fn.handlers()
        cands = []
        for b in fn.blocks:
            if b.term.op != "br":
                continue
            c, t, f = b.term.args
            if t == f or b.id in (t, f) or t in handlers or f in handlers:
                continue
            if preds[t] != [b.id] or preds[f] != [b.id]:
                continue
            cands.append(b.id)
        for bid in ctx.select(cands):
            local = _locals(fn)
            blk = fn.block(bid)
            c, t, f = blk.term.args
            tb, fb = fn.block(t), fn.block(f)
            moved = 0
            while tb.instrs and fb.instrs:
                a, o = tb.instrs[0], fb.instrs[0]
                if a.op in TRAPPING or a.op == "catch" or a.op != o.op:
                    break
                rename = {}
                if a.dst != o.dst:
                    if a.dst is None or o.dst is None or a.dst not in local or o.dst not in local:
                        break
                    if fn.reg_types[a.dst] != fn.reg_types[o.dst]:
                        break
                    rename = {o.dst: a.dst}
                if a.args != o.args or a.dst == c:
                    break
                remove_instr(fn, t, 0)
                remove_instr(fn, f, 0)
                append_instrs(fn, bid, [a])
                if rename:
                    fb.instrs = [x.rename(rename) for x in fb.instrs]
                    fb.term = fb.term.rename(rename)
                    local.discard(o.dst)
                moved += 1
            if moved:
                sites.append(site(fn, bid) + f":{moved}")
    return sites
