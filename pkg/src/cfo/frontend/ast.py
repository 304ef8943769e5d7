"""MiniLang syntax tree.

Nodes are plain dataclasses. ``span`` never takes part in equality, so two
trees built from differently formatted source compare equal when their
structure matches.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Union

INT_T, BOOL_T, ARR_T, VOID_T = "int", "bool", "int[]", "void"
VALUE_TYPES = (INT_T, BOOL_T, ARR_T)
INTRINSIC_NAMES = ("print", "print_str", "len", "min")


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _span() -> object:
    return field(default=None, compare=False, repr=False)


class Node:
    kind = "node"

    def children(self) -> Iterator["Node"]:
        for f in fields(self):
            if f.name == "span":
                continue
            v = getattr(self, f.name)
            if isinstance(v, Node):
                yield v
            elif isinstance(v, list):
                for x in v:
                    if isinstance(x, Node):
                        yield x
                    elif isinstance(x, tuple):
                        yield from (y for y in x if isinstance(y, Node))

    def walk(self) -> Iterator["Node"]:
        yield self
        for c in self.children():
            yield from c.walk()


# -- expressions -----------------------------------------------------------------

@dataclass(eq=True)
class IntLit(Node):
    value: int
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class BoolLit(Node):
    value: bool
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class NullLit(Node):
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class StrLit(Node):
    value: str
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class ArrayLit(Node):
    values: list[int]
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class NewArray(Node):
    size: "Expr"
    span: Optional[Span] = _span()
    kind = "literal"


@dataclass(eq=True)
class Var(Node):
    name: str
    span: Optional[Span] = _span()
    kind = "var-ref"


@dataclass(eq=True)
class Index(Node):
    array: "Expr"
    index: "Expr"
    span: Optional[Span] = _span()
    kind = "index"


@dataclass(eq=True)
class Call(Node):
    name: str
    args: list["Expr"]
    span: Optional[Span] = _span()
    kind = "call"


@dataclass(eq=True)
class Intrinsic(Node):
    name: str
    args: list["Expr"]
    span: Optional[Span] = _span()
    kind = "intrinsic-call"


@dataclass(eq=True)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = _span()
    kind = "binary-op"


@dataclass(eq=True)
class Unary(Node):
    op: str  # "-" or "!"
    operand: "Expr"
    span: Optional[Span] = _span()
    kind = "unary-op"


Expr = Union[IntLit, BoolLit, NullLit, StrLit, ArrayLit, NewArray, Var, Index, Call, Intrinsic,
             Binary, Unary]


# -- statements --------------------------------------------------------------------

@dataclass(eq=True)
class Block(Node):
    stmts: list["Stmt"]
    span: Optional[Span] = _span()
    kind = "block"


@dataclass(eq=True)
class VarDecl(Node):
    type: str
    name: str
    init: Optional[Expr]
    span: Optional[Span] = _span()
    kind = "var-decl"


@dataclass(eq=True)
class Assign(Node):
    target: Union[Var, Index]
    value: Expr
    span: Optional[Span] = _span()
    kind = "assign"


@dataclass(eq=True)
class ExprStmt(Node):
    expr: Union[Call, Intrinsic]
    span: Optional[Span] = _span()
    kind = "call"


@dataclass(eq=True)
class If(Node):
    cond: Expr
    then: Block
    orelse: Optional[Block]
    span: Optional[Span] = _span()
    kind = "if"


@dataclass(eq=True)
class While(Node):
    cond: Expr
    body: Block
    span: Optional[Span] = _span()
    kind = "while"


@dataclass(eq=True)
class For(Node):
    init: Optional["Stmt"]
    cond: Optional[Expr]
    step: Optional["Stmt"]
    body: Block
    span: Optional[Span] = _span()
    kind = "for"


@dataclass(eq=True)
class Case(Node):
    value: int
    body: Block
    span: Optional[Span] = _span()
    kind = "case"


@dataclass(eq=True)
class Switch(Node):
    subject: Expr
    cases: list[Case]
    default: Optional[Block]
    span: Optional[Span] = _span()
    kind = "switch"


@dataclass(eq=True)
class Break(Node):
    span: Optional[Span] = _span()
    kind = "break"


@dataclass(eq=True)
class Continue(Node):
    span: Optional[Span] = _span()
    kind = "continue"


@dataclass(eq=True)
class Return(Node):
    value: Optional[Expr]
    span: Optional[Span] = _span()
    kind = "return"


@dataclass(eq=True)
class Throw(Node):
    code: Expr
    span: Optional[Span] = _span()
    kind = "throw"


@dataclass(eq=True)
class Catch(Node):
    kinds: Optional[list[str]]  # None catches every kind
    name: Optional[str]
    body: Block
    span: Optional[Span] = _span()
    kind = "catch"


@dataclass(eq=True)
class Try(Node):
    body: Block
    catches: list[Catch]
    span: Optional[Span] = _span()
    kind = "try-catch"


Stmt = Union[Block, VarDecl, Assign, ExprStmt, If, While, For, Switch, Break, Continue, Return,
             Throw, Try]


@dataclass(eq=True)
class Param(Node):
    name: str
    type: str
    span: Optional[Span] = _span()
    kind = "param"


@dataclass(eq=True)
class FunctionDecl(Node):
    name: str
    params: list[Param]
    ret_type: str
    body: Block
    span: Optional[Span] = _span()
    kind = "function"


@dataclass
class SourceUnit:
    path: str
    text: str
    functions: list[FunctionDecl]

    def function(self, name: str) -> FunctionDecl:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SourceUnit) and self.functions == other.functions


def max_nesting(node: Node) -> int:
    """Depth of nested control constructs (if/while/for/switch/try) below ``node``."""
    nested = (If, While, For, Switch, Try)
    best = 0
    for c in node.children():
        d = max_nesting(c)
        if isinstance(c, nested):
            d += 1
        best = max(best, d)
    return best
