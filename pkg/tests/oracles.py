"""Independent reference implementations used to cross-check the analyses."""
from __future__ import annotations

import random


def reachable(succ: dict[int, list[int]], entry: int, removed: int | None = None) -> set[int]:
    if entry == removed:
        return set()
    seen, stack = {entry}, [entry]
    while stack:
        n = stack.pop()
        for m in succ.get(n, ()):
            if m != removed and m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def path_dominators(succ: dict[int, list[int]], entry: int) -> dict[int, set[int]]:
    """``a`` dominates ``b`` iff deleting ``a`` cuts every path from the entry to ``b``."""
    live = reachable(succ, entry)
    dom = {b: {b} for b in live}
    for a in live:
        cut = reachable(succ, entry, removed=a)
        for b in live:
            if b not in cut:
                dom[b].add(a)
    return dom


def t1t2_reducible(succ: dict[int, list[int]], entry: int) -> bool:
    """Interval collapse: drop self loops (T1), merge nodes with one predecessor (T2)."""
    live = reachable(succ, entry)
    graph = {n: {m for m in succ.get(n, ()) if m in live} for n in live}
    changed = True
    while changed and len(graph) > 1:
        changed = False
        for n in graph:
            graph[n].discard(n)
        preds: dict[int, set[int]] = {n: set() for n in graph}
        for n, ms in graph.items():
            for m in ms:
                preds[m].add(n)
        for n in list(graph):
            if n != entry and len(preds[n]) == 1:
                (p,) = preds[n]
                graph[p] |= graph.pop(n)
                graph[p].discard(n)
                for ms in graph.values():
                    if n in ms:
                        ms.discard(n)
                        ms.add(p)
                changed = True
                break
    return len(graph) == 1


def random_cfg(rng: random.Random, max_blocks: int = 15) -> dict[int, list[int]]:
    n = rng.randint(1, max_blocks)
    succ = {}
    for b in range(n):
        k = rng.choice((0, 1, 1, 2, 2, 3)) if b else rng.choice((1, 2))
        succ[b] = sorted({rng.randrange(n) for _ in range(k)})
    return succ


def count_cfg(fn) -> tuple[int, int]:
    """Normal edges and blocks, recounted straight from the terminators."""
    edges = 0
    for b in fn.blocks:
        t = b.term
        if t.op == "jmp":
            targets = {t.args[0]}
        elif t.op == "br":
            targets = {t.args[1], t.args[2]}
        elif t.op == "switch":
            targets = {tgt for _, tgt in t.args[1]} | {t.args[2]}
        else:
            targets = set()
        edges += len(targets)
    return edges, len(fn.blocks)
