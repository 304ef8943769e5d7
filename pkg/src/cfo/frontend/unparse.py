"""Pretty-printer from the syntax tree back to MiniLang source.

``parse(unparse(u))`` yields a tree equal to ``u``.
"""
from __future__ import annotations

import json

from . import ast as A

_PREC = {
    "||": 1, "&&": 2, "^": 3, "==": 4, "!=": 4,
    "<": 5, "<=": 5, ">": 5, ">=": 5, "+": 6, "-": 6, "*": 7, "/": 7, "%": 7,
}
_UNARY_PREC = 8
_INDENT = "    "


def expr_text(e) -> str:
    return _expr(e)[0]


def _expr(e) -> tuple[str, int]:
    """Source text of ``e`` and its binding strength."""
    if isinstance(e, A.IntLit):
        return str(e.value), (_UNARY_PREC if e.value < 0 else 9)
    if isinstance(e, A.BoolLit):
        return ("true" if e.value else "false"), 9
    if isinstance(e, A.NullLit):
        return "null", 9
    if isinstance(e, A.StrLit):
        return json.dumps(e.value), 9
    if isinstance(e, A.ArrayLit):
        return "{" + ", ".join(str(v) for v in e.values) + "}", 9
    if isinstance(e, A.NewArray):
        return f"new int[{expr_text(e.size)}]", 9
    if isinstance(e, A.Var):
        return e.name, 9
    if isinstance(e, A.Index):
        base, p = _expr(e.array)
        if p < 9:
            base = f"({base})"
        return f"{base}[{expr_text(e.index)}]", 9
    if isinstance(e, (A.Call, A.Intrinsic)):
        return f"{e.name}(" + ", ".join(expr_text(a) for a in e.args) + ")", 9
    if isinstance(e, A.Unary):
        inner, p = _expr(e.operand)
        # keep "-(5)" distinct from the literal -5 and avoid lexing "--"
        if p < _UNARY_PREC or (e.op == "-" and (isinstance(e.operand, A.IntLit) or inner.startswith("-"))):
            inner = f"({inner})"
        return e.op + inner, _UNARY_PREC
    if isinstance(e, A.Binary):
        p = _PREC[e.op]
        left, lp = _expr(e.left)
        right, rp = _expr(e.right)
        if lp < p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}", p
    raise TypeError(f"cannot print {type(e).__name__}")


def _simple(s) -> str:
    if isinstance(s, A.VarDecl):
        init = "" if s.init is None else f" = {expr_text(s.init)}"
        return f"{s.type} {s.name}{init}"
    if isinstance(s, A.Assign):
        return f"{expr_text(s.target)} = {expr_text(s.value)}"
    if isinstance(s, A.ExprStmt):
        return expr_text(s.expr)
    raise TypeError(f"not a simple statement: {type(s).__name__}")


class _Printer:
    def __init__(self):
        self.lines: list[str] = []

    def line(self, depth: int, text: str) -> None:
        self.lines.append(_INDENT * depth + text)

    def body(self, depth: int, b: A.Block) -> None:
        for s in b.stmts:
            self.stmt(depth, s)

    def braced(self, depth: int, head: str, b: A.Block, tail: str = "") -> None:
        self.line(depth, head + " {")
        self.body(depth + 1, b)
        self.line(depth, "}" + tail)

    def stmt(self, d: int, s) -> None:
        if isinstance(s, A.Block):
            self.line(d, "{")
            self.body(d + 1, s)
            self.line(d, "}")
        elif isinstance(s, (A.VarDecl, A.Assign, A.ExprStmt)):
            self.line(d, _simple(s) + ";")
        elif isinstance(s, A.If):
            self.if_(d, s, "if")
        elif isinstance(s, A.While):
            self.braced(d, f"while ({expr_text(s.cond)})", s.body)
        elif isinstance(s, A.For):
            init = "" if s.init is None else _simple(s.init)
            cond = "" if s.cond is None else expr_text(s.cond)
            step = "" if s.step is None else _simple(s.step)
            self.braced(d, f"for ({init}; {cond}; {step})", s.body)
        elif isinstance(s, A.Switch):
            self.line(d, f"switch ({expr_text(s.subject)}) {{")
            for c in s.cases:
                self.line(d + 1, f"case {c.value}:")
                self.body(d + 2, c.body)
            if s.default is not None:
                self.line(d + 1, "default:")
                self.body(d + 2, s.default)
            self.line(d, "}")
        elif isinstance(s, A.Break):
            self.line(d, "break;")
        elif isinstance(s, A.Continue):
            self.line(d, "continue;")
        elif isinstance(s, A.Return):
            self.line(d, "return;" if s.value is None else f"return {expr_text(s.value)};")
        elif isinstance(s, A.Throw):
            self.line(d, f"throw({expr_text(s.code)});")
        elif isinstance(s, A.Try):
            self.line(d, "try {")
            self.body(d + 1, s.body)
            for c in s.catches:
                head = "} catch"
                if c.kinds is not None:
                    head += " " + "|".join(c.kinds)
                if c.name is not None:
                    head += f" ({c.name})"
                self.line(d, head + " {")
                self.body(d + 1, c.body)
            self.line(d, "}")
        else:
            raise TypeError(f"cannot print {type(s).__name__}")

    def if_(self, d: int, s: A.If, keyword: str) -> None:
        self.line(d, f"{keyword} ({expr_text(s.cond)}) {{")
        self.body(d + 1, s.then)
        o = s.orelse
        if o is None:
            self.line(d, "}")
        elif len(o.stmts) == 1 and isinstance(o.stmts[0], A.If):
            self.lines.append(_INDENT * d + "} ")
            tail = len(self.lines) - 1
            self.if_(d, o.stmts[0], "else if")
            # merge "} " with the following "else if (...) {" line
            self.lines[tail] = self.lines[tail] + self.lines[tail + 1].lstrip()
            del self.lines[tail + 1]
        else:
            self.line(d, "} else {")
            self.body(d + 1, o)
            self.line(d, "}")


def unparse(unit: A.SourceUnit) -> str:
    chunks = []
    for f in unit.functions:
        p = _Printer()
        params = ", ".join(f"{x.name}: {x.type}" for x in f.params)
        ret = "" if f.ret_type == A.VOID_T else f" -> {f.ret_type}"
        p.braced(0, f"fn {f.name}({params}){ret}", f.body)
        chunks.append("\n".join(p.lines))
    return "\n\n".join(chunks) + "\n"
