"""Recursive-descent parser and semantic checker for MiniLang.

Syntax errors stop at the first offending token; semantic errors (unknown
names, duplicate declarations, type errors) are collected across the whole
unit and reported together.
"""
from __future__ import annotations

from .ast import (
    ARR_T, BOOL_T, INT_T, INTRINSIC_NAMES, VOID_T, ArrayLit, Assign, Binary, Block, BoolLit,
    Break, Call, Case, Catch, Continue, ExprStmt, For, FunctionDecl, If, Index, IntLit,
    Intrinsic, NewArray, Node, NullLit, Param, Return, SourceUnit, Span, StrLit, Switch, Throw,
    Try, Unary, Var, VarDecl, While,
)
from .lexer import Diagnostic, FrontendError, Token, tokenize

TRAP_KIND_NAMES = ("NullAccess", "IndexOutOfBounds", "DivByZero", "User")
INT_MIN, INT_MAX = -(1 << 63), (1 << 63) - 1

_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("^",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]
_COMPOUND = {"+=": "+", "-=": "-", "*=": "*"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "kw") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, expected: tuple[str, ...], what: str | None = None) -> None:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise FrontendError([Diagnostic(t.span, what or f"syntax error: unexpected {found}", expected)])

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail((repr(text),))
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail(("identifier",))
        return self.advance()

    # -- declarations ------------------------------------------------------------
    def unit(self, path: str, text: str) -> SourceUnit:
        funcs = []
        while self.tok.kind != "eof":
            funcs.append(self.function())
        return SourceUnit(path, text, funcs)

    def function(self) -> FunctionDecl:
        start = self.expect("fn").span
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pt = self.ident()
                self.expect(":")
                params.append(Param(pt.text, self.type_(), pt.span))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        ret = VOID_T
        if self.at("->"):
            self.advance()
            ret = self.type_(allow_void=True)
        body = self.block()
        return FunctionDecl(name, params, ret, body, start)

    def type_(self, allow_void: bool = False) -> str:
        if self.at("int"):
            self.advance()
            if self.at("["):
                self.advance()
                self.expect("]")
                return ARR_T
            return INT_T
        if self.at("bool"):
            self.advance()
            return BOOL_T
        if allow_void and self.at("void"):
            self.advance()
            return VOID_T
        self.fail(("'int'", "'bool'", "'int[]'") + (("'void'",) if allow_void else ()))
        raise AssertionError  # unreachable

    # -- statements ----------------------------------------------------------------
    def block(self) -> Block:
        start = self.expect("{").span
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail(("'}'",))
            stmts.extend(self.statement())
        self.advance()
        return Block(stmts, start)

    def statement(self) -> list:
        t = self.tok
        sp = t.span
        if self.at("{"):
            return [self.block()]
        if self.at("int", "bool"):
            out = self.declarations()
            self.expect(";")
            return out
        if self.at("if"):
            return [self.if_()]
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return [While(cond, self.block(), sp)]
        if self.at("for"):
            return [self.for_()]
        if self.at("switch"):
            return [self.switch()]
        if self.at("break"):
            self.advance()
            self.expect(";")
            return [Break(sp)]
        if self.at("continue"):
            self.advance()
            self.expect(";")
            return [Continue(sp)]
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return [Return(value, sp)]
        if self.at("throw"):
            self.advance()
            self.expect("(")
            code = self.expr()
            self.expect(")")
            self.expect(";")
            return [Throw(code, sp)]
        if self.at("try"):
            return [self.try_()]
        if t.kind == "ident":
            s = self.simple()
            self.expect(";")
            return [s]
        self.fail(("statement",))
        raise AssertionError

    def declarations(self) -> list[VarDecl]:
        typ = self.type_()
        out = []
        while True:
            nt = self.ident()
            init = None
            if self.at("="):
                self.advance()
                init = self.expr()
            out.append(VarDecl(typ, nt.text, init, nt.span))
            if not self.at(","):
                return out
            self.advance()

    def simple(self):
        """Assignment, increment or call statement (no trailing ';')."""
        sp = self.tok.span
        if self.tok.kind == "ident" and self.peek().text == "(" and self.peek().kind == "punct":
            e = self.postfix()
            if not isinstance(e, (Call, Intrinsic)):
                self.fail(("';'",))
            return ExprStmt(e, sp)
        target = self.postfix()
        if not isinstance(target, (Var, Index)):
            raise FrontendError([Diagnostic(sp, "syntax error: invalid assignment target")])
        if self.at("="):
            self.advance()
            return Assign(target, self.expr(), sp)
        if self.tok.kind == "punct" and self.tok.text in _COMPOUND:
            op = _COMPOUND[self.advance().text]
            return Assign(target, Binary(op, target, self.expr(), sp), sp)
        if self.at("++", "--"):
            op = "+" if self.advance().text == "++" else "-"
            return Assign(target, Binary(op, target, IntLit(1, sp), sp), sp)
        self.fail(("'='", "'+='", "'-='", "'*='", "'++'", "'--'"))
        raise AssertionError

    def if_(self) -> If:
        sp = self.expect("if").span
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                nested = self.if_()
                orelse = Block([nested], nested.span)
            else:
                orelse = self.block()
        return If(cond, then, orelse, sp)

    def for_(self) -> For:
        sp = self.expect("for").span
        self.expect("(")
        init = None
        if not self.at(";"):
            if self.at("int", "bool"):
                decls = self.declarations()
                if len(decls) != 1:
                    raise FrontendError([Diagnostic(sp, "for-initializer declares one variable")])
                init = decls[0]
            else:
                init = self.simple()
        self.expect(";")
        cond = None if self.at(";") else self.expr()
        self.expect(";")
        step = None if self.at(")") else self.simple()
        self.expect(")")
        return For(init, cond, step, self.block(), sp)

    def switch(self) -> Switch:
        sp = self.expect("switch").span
        self.expect("(")
        subject = self.expr()
        self.expect(")")
        self.expect("{")
        cases: list[Case] = []
        default = None
        while not self.at("}"):
            csp = self.tok.span
            if self.at("case"):
                self.advance()
                value = self.int_literal()
                self.expect(":")
                cases.append(Case(value, Block(self.case_body(), csp), csp))
            elif self.at("default"):
                self.advance()
                self.expect(":")
                if default is not None:
                    raise FrontendError([Diagnostic(csp, "duplicate default label")])
                default = Block(self.case_body(), csp)
            else:
                self.fail(("'case'", "'default'", "'}'"))
        self.advance()
        return Switch(subject, cases, default, sp)

    def case_body(self) -> list:
        stmts = []
        while not self.at("case", "default", "}"):
            if self.tok.kind == "eof":
                self.fail(("'}'",))
            stmts.extend(self.statement())
        return stmts

    def int_literal(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        if self.tok.kind != "int":
            self.fail(("integer literal",))
        t = self.advance()
        v = -t.value if neg else t.value
        if not INT_MIN <= v <= INT_MAX:
            raise FrontendError([Diagnostic(t.span, "integer literal out of range")])
        return v

    def try_(self) -> Try:
        sp = self.expect("try").span
        body = self.block()
        catches = []
        while self.at("catch"):
            csp = self.advance().span
            kinds = None
            if self.tok.kind == "ident":
                kinds = [self.kind_name()]
                while self.at("|"):
                    self.advance()
                    kinds.append(self.kind_name())
            name = None
            if self.at("("):
                self.advance()
                name = self.ident().text
                self.expect(")")
            catches.append(Catch(kinds, name, self.block(), csp))
        if not catches:
            self.fail(("'catch'",))
        return Try(body, catches, sp)

    def kind_name(self) -> str:
        t = self.ident()
        if t.text not in TRAP_KIND_NAMES:
            raise FrontendError([Diagnostic(t.span, f"unknown trap kind {t.text!r}", TRAP_KIND_NAMES)])
        return t.text

    # -- expressions -----------------------------------------------------------------
    def expr(self, level: int = 0):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "punct" and self.tok.text in ops:
            t = self.advance()
            right = self.expr(level + 1)
            left = Binary(t.text, left, right, t.span)
        return left

    def unary(self):
        if self.at("-"):
            t = self.advance()
            if self.tok.kind == "int":
                lit = self.advance()
                v = -lit.value
                if v < INT_MIN:
                    raise FrontendError([Diagnostic(lit.span, "integer literal out of range")])
                return self.postfix_tail(IntLit(v, t.span))
            return Unary("-", self.unary(), t.span)
        if self.at("!"):
            t = self.advance()
            return Unary("!", self.unary(), t.span)
        return self.postfix()

    def postfix(self):
        return self.postfix_tail(self.primary())

    def postfix_tail(self, e):
        while self.at("["):
            t = self.advance()
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx, t.span)
        return e

    def primary(self):
        t = self.tok
        sp = t.span
        if t.kind == "int":
            self.advance()
            if t.value > INT_MAX:
                raise FrontendError([Diagnostic(sp, "integer literal out of range")])
            return IntLit(t.value, sp)
        if t.kind == "string":
            self.advance()
            return StrLit(t.value, sp)
        if self.at("true", "false"):
            self.advance()
            return BoolLit(t.text == "true", sp)
        if self.at("null"):
            self.advance()
            return NullLit(sp)
        if self.at("new"):
            self.advance()
            self.expect("int")
            self.expect("[")
            size = self.expr()
            self.expect("]")
            return NewArray(size, sp)
        if self.at("{"):
            self.advance()
            values = []
            if not self.at("}"):
                while True:
                    values.append(self.int_literal())
                    if not self.at(","):
                        break
                    self.advance()
            self.expect("}")
            return ArrayLit(values, sp)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.at(","):
                            break
                        self.advance()
                self.expect(")")
                cls = Intrinsic if t.text in INTRINSIC_NAMES else Call
                return cls(t.text, args, sp)
            return Var(t.text, sp)
        self.fail(("expression",))
        raise AssertionError


def parse_syntax(source: str, path: str = "<input>") -> SourceUnit:
    """Parse without semantic checks (raises on the first syntax error)."""
    return _Parser(source).unit(path, source)


def parse(source: str, path: str = "<input>") -> SourceUnit:
    """Parse and check a MiniLang unit; raise :class:`FrontendError` on any diagnostic."""
    unit = parse_syntax(source, path)
    diags = check_unit(unit)
    if diags:
        raise FrontendError(diags)
    return unit


# -- semantic checks ------------------------------------------------------------------

_INTRINSIC_SIGS = {
    "print": None,  # int or bool
    "print_str": None,  # string literal
    "len": ([ARR_T], INT_T),
    "min": ([INT_T, INT_T], INT_T),
}


class _Checker:
    def __init__(self, unit: SourceUnit):
        self.unit = unit
        self.diags: list[Diagnostic] = []
        self.sigs: dict[str, FunctionDecl] = {}
        self.scopes: list[dict[str, str]] = []
        self.fn: FunctionDecl | None = None
        self.loops = 0
        self.breakable = 0

    def err(self, node: Node | None, msg: str) -> None:
        self.diags.append(Diagnostic(getattr(node, "span", None), msg))

    def run(self) -> list[Diagnostic]:
        for f in self.unit.functions:
            if f.name in self.sigs:
                self.err(f, f"duplicate declaration of function {f.name!r}")
            elif f.name in INTRINSIC_NAMES:
                self.err(f, f"{f.name!r} is a reserved intrinsic name")
            else:
                self.sigs[f.name] = f
        main = self.sigs.get("main")
        if main is None:
            self.diags.append(Diagnostic(None, "missing function 'main'"))
        elif [p.type for p in main.params] != [ARR_T] or main.ret_type != INT_T:
            self.err(main, "main must have signature (int[]) -> int")
        for f in self.unit.functions:
            self.function(f)
        return self.diags

    def lookup(self, name: str) -> str | None:
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        return None

    def declare(self, node: Node, name: str, typ: str) -> None:
        if self.lookup(name) is not None:
            self.err(node, f"duplicate declaration of {name!r}")
        self.scopes[-1][name] = typ

    def function(self, f: FunctionDecl) -> None:
        self.fn = f
        self.scopes = [{}]
        for p in f.params:
            self.declare(p, p.name, p.type)
        self.block(f.body, new_scope=False)

    def block(self, b: Block, new_scope: bool = True) -> None:
        if new_scope:
            self.scopes.append({})
        for s in b.stmts:
            self.stmt(s)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s) -> None:
        if isinstance(s, Block):
            self.block(s)
        elif isinstance(s, VarDecl):
            if s.init is not None:
                self.expect_type(s.init, s.type)
            self.declare(s, s.name, s.type)
        elif isinstance(s, Assign):
            t = self.expr(s.target)
            if t is not None:
                self.expect_type(s.value, t)
            else:
                self.expr(s.value)
        elif isinstance(s, ExprStmt):
            self.expr(s.expr, statement=True)
        elif isinstance(s, If):
            self.expect_type(s.cond, BOOL_T)
            self.block(s.then)
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, While):
            self.expect_type(s.cond, BOOL_T)
            self.loop_body(s.body)
        elif isinstance(s, For):
            self.scopes.append({})
            if s.init is not None:
                self.stmt(s.init)
            if s.cond is not None:
                self.expect_type(s.cond, BOOL_T)
            if s.step is not None:
                if isinstance(s.step, VarDecl):
                    self.err(s.step, "for-step cannot declare")
                self.stmt(s.step)
            self.loop_body(s.body)
            self.scopes.pop()
        elif isinstance(s, Switch):
            self.expect_type(s.subject, INT_T)
            seen = set()
            for c in s.cases:
                if c.value in seen:
                    self.err(c, f"duplicate case label {c.value}")
                seen.add(c.value)
            self.breakable += 1
            for c in s.cases:
                self.block(c.body)
            if s.default is not None:
                self.block(s.default)
            self.breakable -= 1
        elif isinstance(s, Break):
            if not self.breakable:
                self.err(s, "break outside loop or switch")
        elif isinstance(s, Continue):
            if not self.loops:
                self.err(s, "continue outside loop")
        elif isinstance(s, Return):
            want = self.fn.ret_type
            if s.value is None:
                if want != VOID_T:
                    self.err(s, f"return needs a {want} value")
            elif want == VOID_T:
                self.err(s, "void function returns a value")
                self.expr(s.value)
            else:
                self.expect_type(s.value, want)
        elif isinstance(s, Throw):
            self.expect_type(s.code, INT_T)
        elif isinstance(s, Try):
            self.block(s.body)
            for c in s.catches:
                self.scopes.append({})
                if c.name is not None:
                    self.declare(c, c.name, INT_T)
                self.block(c.body)
                self.scopes.pop()
        else:  # pragma: no cover
            self.err(s, f"unsupported statement {type(s).__name__}")

    def loop_body(self, body: Block) -> None:
        self.loops += 1
        self.breakable += 1
        self.block(body)
        self.loops -= 1
        self.breakable -= 1

    def expect_type(self, e, want: str) -> None:
        got = self.expr(e)
        if got is None:
            return
        if got == "null" and want == ARR_T:
            return
        if got != want:
            self.err(e, f"type error: expected {want}, found {got}")

    def expr(self, e, statement: bool = False) -> str | None:
        """Type of ``e`` (``None`` after an error already reported)."""
        if isinstance(e, IntLit):
            return INT_T
        if isinstance(e, BoolLit):
            return BOOL_T
        if isinstance(e, NullLit):
            return "null"
        if isinstance(e, StrLit):
            self.err(e, "string literals are only allowed as print_str arguments")
            return None
        if isinstance(e, ArrayLit):
            return ARR_T
        if isinstance(e, NewArray):
            self.expect_type(e.size, INT_T)
            return ARR_T
        if isinstance(e, Var):
            t = self.lookup(e.name)
            if t is None:
                self.err(e, f"unknown identifier {e.name!r}")
            return t
        if isinstance(e, Index):
            self.expect_type(e.array, ARR_T)
            self.expect_type(e.index, INT_T)
            return INT_T
        if isinstance(e, Call):
            f = self.sigs.get(e.name)
            if f is None:
                self.err(e, f"unknown function {e.name!r}")
                for a in e.args:
                    self.expr(a)
                return None
            if len(e.args) != len(f.params):
                self.err(e, f"{e.name} expects {len(f.params)} arguments, got {len(e.args)}")
            for a, p in zip(e.args, f.params):
                self.expect_type(a, p.type)
            if f.ret_type == VOID_T and not statement:
                self.err(e, f"void function {e.name!r} used as a value")
                return None
            return f.ret_type
        if isinstance(e, Intrinsic):
            return self.intrinsic(e, statement)
        if isinstance(e, Unary):
            if e.op == "-":
                self.expect_type(e.operand, INT_T)
                return INT_T
            self.expect_type(e.operand, BOOL_T)
            return BOOL_T
        if isinstance(e, Binary):
            return self.binary(e)
        self.err(e, "bad expression")  # pragma: no cover
        return None

    def intrinsic(self, e: Intrinsic, statement: bool) -> str | None:
        if e.name == "print":
            if not statement:
                self.err(e, "print used as a value")
            if len(e.args) != 1:
                self.err(e, "print expects 1 argument")
                return None
            t = self.expr(e.args[0])
            if t not in (INT_T, BOOL_T, None):
                self.err(e, f"type error: cannot print {t}")
            return None
        if e.name == "print_str":
            if not statement:
                self.err(e, "print_str used as a value")
            if len(e.args) != 1 or not isinstance(e.args[0], StrLit):
                self.err(e, "print_str expects one string literal")
            return None
        params, ret = _INTRINSIC_SIGS[e.name]
        if len(e.args) != len(params):
            self.err(e, f"{e.name} expects {len(params)} arguments, got {len(e.args)}")
        for a, p in zip(e.args, params):
            self.expect_type(a, p)
        if statement:
            self.err(e, f"result of {e.name} is unused")
        return ret

    def binary(self, e: Binary) -> str | None:
        op = e.op
        if op in ("+", "-", "*", "/", "%"):
            self.expect_type(e.left, INT_T)
            self.expect_type(e.right, INT_T)
            return INT_T
        if op in ("<", "<=", ">", ">="):
            self.expect_type(e.left, INT_T)
            self.expect_type(e.right, INT_T)
            return BOOL_T
        if op in ("&&", "||"):
            self.expect_type(e.left, BOOL_T)
            self.expect_type(e.right, BOOL_T)
            return BOOL_T
        lt, rt = self.expr(e.left), self.expr(e.right)
        if lt is None or rt is None:
            return INT_T if op == "^" else BOOL_T
        if op == "^":
            if lt != rt or lt not in (INT_T, BOOL_T):
                self.err(e, f"type error: cannot xor {lt} and {rt}")
            return lt
        # == / !=
        if ARR_T in (lt, rt) or "null" in (lt, rt):
            if not ({lt, rt} == {ARR_T, "null"}):
                self.err(e, "arrays can only be compared with null")
            return BOOL_T
        if lt != rt:
            self.err(e, f"type error: cannot compare {lt} and {rt}")
        return BOOL_T


def check_unit(unit: SourceUnit) -> list[Diagnostic]:
    return _Checker(unit).run()


__all__ = ["Diagnostic", "FrontendError", "Span", "check_unit", "parse", "parse_syntax"]
