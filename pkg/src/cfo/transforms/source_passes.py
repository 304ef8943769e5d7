"""Source-level rewrites on the MiniLang syntax tree, re-lowered to IR afterwards."""
from __future__ import annotations

import copy

from ..frontend import ast as A
from ..frontend import check_unit, lower
from ..frontend.lexer import FrontendError
from ..ir.model import Program
from .engine import Context, PassInvariantError, register


def _relower(unit: A.SourceUnit) -> Program:
    diags = check_unit(unit)
    if diags:
        raise PassInvariantError("rewritten source does not check: " + str(diags[0]))
    try:
        return lower(unit)
    except FrontendError as e:  # pragma: no cover - check_unit should have caught it
        raise PassInvariantError(str(e)) from None


def _statement_lists(node: A.Node):
    """Every statement list in ``node`` (block bodies, case bodies, ...), outermost first."""
    for n in node.walk():
        if isinstance(n, A.Block):
            yield n.stmts


def _has_continue(body: A.Block) -> bool:
    return any(isinstance(n, A.Continue) for n in body.walk())


def _for_to_while(s: A.For) -> A.Block:
    cond = s.cond if s.cond is not None else A.BoolLit(True, s.span)
    body = [s.body] + ([s.step] if s.step is not None else [])
    loop = A.While(cond, A.Block(body, s.body.span), s.span)
    return A.Block(([s.init] if s.init is not None else []) + [loop], s.span)


def _while_to_for(s: A.While) -> A.For:
    return A.For(None, s.cond, None, s.body, s.span)


@register("code_clone_iv", ast_level=True)
def code_clone_iv(ctx: Context, program: Program):
    """Swap loop forms: ``for`` becomes an equivalent ``while`` and vice versa."""
    unit = copy.deepcopy(program.source)
    sites = []
    for fn in unit.functions:
        spots = [(stmts, i) for stmts in _statement_lists(fn.body)
                 for i, s in enumerate(stmts)
                 if isinstance(s, A.While) or (isinstance(s, A.For) and not _has_continue(s.body))]
        for stmts, i in ctx.select(spots):
            s = stmts[i]
            stmts[i] = _for_to_while(s) if isinstance(s, A.For) else _while_to_for(s)
            sites.append(f"{fn.name}:{s.kind}@{s.span}")
    return _relower(unit), sites


def _fresh(fn: A.FunctionDecl, base: str) -> str:
    taken = {p.name for p in fn.params} | {n.name for n in fn.body.walk() if isinstance(n, A.VarDecl)}
    k = 0
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


@register("replace_equivalent_codes", ast_level=True)
def replace_equivalent_codes(ctx: Context, program: Program):
    """Invert ``if`` statements (negated test, swapped arms) and insert an unused local."""
    unit = copy.deepcopy(program.source)
    sites = []
    for fn in unit.functions:
        ifs = [n for n in fn.body.walk() if isinstance(n, A.If)]
        for s in ctx.select(ifs):
            other = s.orelse if s.orelse is not None else A.Block([], s.span)
            s.cond, s.then, s.orelse = A.Unary("!", s.cond, s.span), other, s.then
            sites.append(f"{fn.name}:if@{s.span}")
        name = _fresh(fn, "spare")
        fn.body.stmts.insert(0, A.VarDecl(A.INT_T, name, A.IntLit(ctx.rng.randint(0, 99))))
        sites.append(f"{fn.name}:decl {name}")
    return _relower(unit), sites
