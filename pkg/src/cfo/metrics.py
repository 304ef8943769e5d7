"""Potency proxies and structural checks used as decompiler-resistance proxies."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .ir.analysis import is_reducible as _fn_reducible
from .ir.analysis import natural_loops
from .ir.model import Function, Program


@dataclass(frozen=True)
class CFGMetrics:
    functions: int
    blocks: int
    edges: int  # normal edges
    trap_edges: int  # distinct (block, handler) pairs
    instructions: int  # terminators included
    cyclomatic: int
    max_switch_fanout: int
    trap_entries: int
    irreducible: bool

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CFGMetrics":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def _components(fn: Function) -> int:
    """Connected components of the undirected normal-edge graph."""
    parent = {b.id: b.id for b in fn.blocks}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in fn.blocks:
        for s in b.successors():
            ra, rb = find(b.id), find(s)
            if ra != rb:
                parent[ra] = rb
    return len({find(b.id) for b in fn.blocks})


def function_cyclomatic(fn: Function) -> int:
    """``E - N + 2P`` over normal edges; handler regions count as their own components."""
    succ = fn.successor_map(with_traps=False)
    e = sum(len(v) for v in succ.values())
    return e - len(fn.blocks) + 2 * _components(fn)


def is_reducible(target: Function | Program) -> bool:
    if isinstance(target, Program):
        return all(_fn_reducible(f) for f in target.functions)
    return _fn_reducible(target)


def compute_metrics(program: Program) -> CFGMetrics:
    blocks = edges = trap_edges = instrs = cc = fanout = entries = 0
    irreducible = False
    for fn in program.functions:
        blocks += len(fn.blocks)
        normal = fn.successor_map(with_traps=False)
        edges += sum(len(v) for v in normal.values())
        trap_edges += len({(t.block, t.handler) for t in fn.traps})
        instrs += fn.instruction_count()
        cc += function_cyclomatic(fn)
        for b in fn.blocks:
            if b.term.op == "switch":
                fanout = max(fanout, len(set(b.successors())))
        entries += len(fn.traps)
        irreducible = irreducible or not _fn_reducible(fn)
    return CFGMetrics(len(program.functions), blocks, edges, trap_edges, instrs, cc, fanout,
                      entries, irreducible)


def potency_delta(before: CFGMetrics, after: CFGMetrics) -> dict:
    """Componentwise differences, ratios and the reducibility flip flag."""
    out: dict = {"delta": {}, "ratio": {}}
    for f in fields(CFGMetrics):
        if f.name == "irreducible":
            continue
        a, b = getattr(before, f.name), getattr(after, f.name)
        out["delta"][f.name] = b - a
        out["ratio"][f.name] = round(b / a, 6) if a else None
    out["dr_proxy_triggered"] = bool(after.irreducible and not before.irreducible)
    return out


# -- structural proxies ------------------------------------------------------------------

def unaligned_trap_entries(fn: Function) -> list:
    """Trap entries whose range does not span their whole block."""
    sizes = {b.id: len(b.instrs) + 1 for b in fn.blocks}
    return [t for t in fn.traps if (t.start, t.end) != (0, sizes[t.block])]


def single_dispatch_loop(fn: Function) -> bool:
    """Exactly one loop, and that loop is driven by a switch dispatch."""
    loops = natural_loops(fn)
    if len(loops) != 1:
        return False
    body = loops[0].body
    return any(b.term.op == "switch" and b.id in body for b in fn.blocks)


def dr_proxies(program: Program, before: Program | None = None) -> dict:
    return {
        "irreducible": not is_reducible(program),
        "irreducible_before": None if before is None else not is_reducible(before),
        "unaligned_trap_entries": sum(len(unaligned_trap_entries(f)) for f in program.functions),
        "dispatch_loop_functions": sorted(f.name for f in program.functions if single_dispatch_loop(f)),
    }
