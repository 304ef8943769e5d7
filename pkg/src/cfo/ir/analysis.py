"""Dependence, dominance, loop and liveness analyses over the IR.

Graph-level helpers take a successor mapping ``{node: [succ, ...]}`` so they
can be reused on synthetic CFGs; the function-level wrappers build that
mapping from a :class:`Function`, trap edges included.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import EFFECTFUL, INTRINSICS, TRAPPING, Block, Function

Graph = dict[int, list[int]]


# -- dependence ---------------------------------------------------------------

def _effectful(op: str) -> bool:
    return op in EFFECTFUL or op in INTRINSICS or op in TRAPPING


def def_use(block: Block, guarded: bool = False) -> set[tuple[int, int]]:
    """Ordering constraints between the non-terminator instructions of ``block``.

    An edge ``(i, j)`` means instruction ``i`` must stay before ``j``. When
    ``guarded`` is set the block sits under a trap handler, so register writes
    may not move across an instruction that can trap (the handler could
    observe the difference).
    """
    instrs = block.instrs
    rw = [(set(ins.reads()), set(ins.writes())) for ins in instrs]
    edges: set[tuple[int, int]] = set()
    for j in range(len(instrs)):
        rj, wj = rw[j]
        oj = instrs[j].op
        for i in range(j):
            ri, wi = rw[i]
            oi = instrs[i].op
            if (wi & rj) or (wj & (ri | wi)):
                edges.add((i, j))
            elif oi in ("load", "store") and oj in ("load", "store"):
                edges.add((i, j))
            elif _effectful(oi) and _effectful(oj):
                edges.add((i, j))
            elif oi == "catch" or oj == "catch":
                edges.add((i, j))
            elif guarded and ((oi in TRAPPING and wj) or (oj in TRAPPING and wi)):
                edges.add((i, j))
    return edges


def is_topological(order: list[int], edges: set[tuple[int, int]]) -> bool:
    pos = {x: k for k, x in enumerate(order)}
    return all(pos[i] < pos[j] for i, j in edges)


# -- graphs -------------------------------------------------------------------

def reachable(succ: Graph, entry: int) -> list[int]:
    """Nodes reachable from ``entry`` in DFS preorder."""
    seen = {entry}
    order = [entry]
    stack = [entry]
    while stack:
        n = stack.pop()
        for s in reversed(succ.get(n, ())):
            if s not in seen:
                seen.add(s)
                order.append(s)
                stack.append(s)
    return order


def _postorder(succ: Graph, entry: int) -> list[int]:
    seen = {entry}
    post: list[int] = []
    stack = [(entry, iter(succ.get(entry, ())))]
    while stack:
        node, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(succ.get(s, ()))))
                break
        else:
            post.append(node)
            stack.pop()
    return post


def immediate_dominators(succ: Graph, entry: int) -> dict[int, int]:
    """Iterative dominator computation (Cooper, Harvey and Kennedy).

    Only nodes reachable from ``entry`` appear in the result; ``idom[entry]``
    is ``entry`` itself.
    """
    post = _postorder(succ, entry)
    rpo = post[::-1]
    index = {n: i for i, n in enumerate(post)}
    preds: dict[int, list[int]] = {n: [] for n in rpo}
    for n in rpo:
        for s in succ.get(n, ()):
            if s in preds:
                preds[s].append(n)
    idom: dict[int, int] = {entry: entry}

    def intersect(a: int, b: int) -> int:
        while a != b:
            while index[a] < index[b]:
                a = idom[a]
            while index[b] < index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in rpo[1:]:
            new = None
            for p in preds[n]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if new is not None and idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def dominates(idom: dict[int, int], a: int, b: int) -> bool:
    """True iff ``a`` dominates ``b`` (reflexive)."""
    if b not in idom:
        return False
    while True:
        if a == b:
            return True
        parent = idom[b]
        if parent == b:
            return False
        b = parent


def retreating_edges(succ: Graph, entry: int) -> list[tuple[int, int]]:
    """Edges whose target is an ancestor on the DFS stack (including self loops)."""
    out = []
    on_stack = {entry}
    seen = {entry}
    stack = [(entry, iter(succ.get(entry, ())))]
    while stack:
        node, it = stack[-1]
        for s in it:
            if s in on_stack:
                out.append((node, s))
            elif s not in seen:
                seen.add(s)
                on_stack.add(s)
                stack.append((s, iter(succ.get(s, ()))))
                break
        else:
            on_stack.discard(node)
            stack.pop()
    return out


def graph_is_reducible(succ: Graph, entry: int) -> bool:
    """Dominator criterion: every DFS retreating edge targets a dominator of its source."""
    idom = immediate_dominators(succ, entry)
    return all(dominates(idom, v, u) for u, v in retreating_edges(succ, entry))


# -- function-level wrappers -----------------------------------------------------

@dataclass
class DominatorTree:
    idom: dict[int, int]
    unreachable: list[int] = field(default_factory=list)

    def dominates(self, a: int, b: int) -> bool:
        return dominates(self.idom, a, b)


def dominators(fn: Function) -> DominatorTree:
    succ = fn.successor_map(with_traps=True)
    idom = immediate_dominators(succ, fn.entry)
    unreachable = [b.id for b in fn.blocks if b.id not in idom]
    return DominatorTree(idom, unreachable)


def reachable_blocks(fn: Function) -> set[int]:
    return set(reachable(fn.successor_map(with_traps=True), fn.entry))


def is_reducible(fn: Function) -> bool:
    succ = fn.successor_map(with_traps=True)
    live = set(reachable(succ, fn.entry))
    pruned = {n: [s for s in ss if s in live] for n, ss in succ.items() if n in live}
    return graph_is_reducible(pruned, fn.entry)


@dataclass
class Loop:
    header: int
    body: set[int]
    latches: list[int]

    def exits(self, fn: Function) -> list[tuple[int, int]]:
        succ = fn.successor_map(with_traps=True)
        return [(b, s) for b in sorted(self.body) for s in succ[b] if s not in self.body]


def natural_loops(fn: Function) -> list[Loop]:
    """Natural loops keyed by header, back edges to one header merged.

    Ordered by header position in the block list, so results are stable.
    """
    succ = fn.successor_map(with_traps=True)
    idom = immediate_dominators(succ, fn.entry)
    preds: dict[int, list[int]] = {n: [] for n in idom}
    for n in idom:
        for s in succ[n]:
            if s in preds:
                preds[s].append(n)
    loops: dict[int, Loop] = {}
    for n in idom:
        for s in succ[n]:
            if s in idom and dominates(idom, s, n):
                lp = loops.setdefault(s, Loop(s, {s}, []))
                lp.latches.append(n)
                work = [n]
                while work:
                    x = work.pop()
                    if x not in lp.body:
                        lp.body.add(x)
                        work.extend(preds[x])
    position = {b.id: i for i, b in enumerate(fn.blocks)}
    return sorted(loops.values(), key=lambda lp: position[lp.header])


# -- liveness ---------------------------------------------------------------------

def liveness(fn: Function) -> tuple[dict[int, set[int]], dict[int, set[int]]]:
    """Block-level live-in / live-out register sets (trap edges included)."""
    succ = fn.successor_map(with_traps=True)
    use: dict[int, set[int]] = {}
    defs: dict[int, set[int]] = {}
    for b in fn.blocks:
        u: set[int] = set()
        d: set[int] = set()
        for ins in b.instrs + [b.term]:
            for r in ins.reads():
                if r not in d:
                    u.add(r)
            d.update(ins.writes())
        use[b.id], defs[b.id] = u, d
    live_in = {b.id: set() for b in fn.blocks}
    live_out = {b.id: set() for b in fn.blocks}
    changed = True
    while changed:
        changed = False
        for b in reversed(fn.blocks):
            out = set()
            for s in succ[b.id]:
                out |= live_in[s]
            inn = use[b.id] | (out - defs[b.id])
            # a handler may run after any guarded instruction
            for t in fn.traps:
                if t.block == b.id:
                    inn |= live_in[t.handler]
            if out != live_out[b.id] or inn != live_in[b.id]:
                live_out[b.id], live_in[b.id] = out, inn
                changed = True
    return live_in, live_out
