"""Lowering from a checked MiniLang syntax tree to the IR.

Structured statements become blocks joined by ``jmp``/``br``/``switch``;
every block created while lowering a ``try`` body gets one whole-block trap
entry per catch clause. Inner ``try`` statements finish first, so their
entries precede the enclosing ones in the trap table.
"""
from __future__ import annotations

from ..ir.edit import remove_unreachable, renumber
from ..ir.model import ALL_KINDS, ARR, BOOL, INT, VOID, Block, Function, Instr, Program, TrapEntry
from . import ast as A

_IR_TYPE = {A.INT_T: INT, A.BOOL_T: BOOL, A.ARR_T: ARR, A.VOID_T: VOID}
_BINOP = {
    "+": "add", "-": "sub", "*": "mul", "/": "div", "%": "rem",
    "==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge", "^": "xor",
}
_COMPARES = ("==", "!=", "<", "<=", ">", ">=")


def _pure(e) -> bool:
    """True when evaluating ``e`` can neither trap nor have effects."""
    if isinstance(e, (A.IntLit, A.BoolLit, A.NullLit, A.Var)):
        return True
    if isinstance(e, A.Unary):
        return _pure(e.operand)
    if isinstance(e, A.Binary):
        return e.op not in ("/", "%") and _pure(e.left) and _pure(e.right)
    return False


class _FunctionLowering:
    def __init__(self, decl: A.FunctionDecl, sigs: dict[str, A.FunctionDecl]):
        self.decl = decl
        self.sigs = sigs
        self.reg_types: list[str] = []
        self.order: list[int] = []
        self.built: dict[int, Block] = {}
        self.cur: int | None = None
        self.instrs: list[Instr] = []
        self.scopes: list[dict[str, int]] = [{}]
        self.jumps: list[tuple[int | None, int | None]] = []  # (break, continue)
        self.pending_traps: list[tuple[int, int, frozenset]] = []
        self.span = decl.span

    # -- plumbing ----------------------------------------------------------------
    def reg(self, typ: str) -> int:
        self.reg_types.append(typ)
        return len(self.reg_types) - 1

    def new_block(self) -> int:
        bid = len(self.order)
        self.order.append(bid)
        return bid

    def start(self, bid: int) -> None:
        assert self.cur is None
        self.cur, self.instrs = bid, []

    def emit(self, op: str, dst=None, *args) -> None:
        if self.cur is None:
            self.start(self.new_block())  # code after a jump is unreachable
        self.instrs.append(Instr(op, dst, tuple(args), "original", self.span))

    def terminate(self, op: str, *args) -> None:
        if self.cur is None:
            self.start(self.new_block())
        self.built[self.cur] = Block(self.cur, self.instrs, Instr(op, None, tuple(args), "original", self.span))
        self.cur, self.instrs = None, []

    def jump(self, target: int) -> None:
        self.terminate("jmp", target)

    def lookup(self, name: str) -> int:
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        raise KeyError(name)  # excluded by the checker

    # -- entry point -----------------------------------------------------------------
    def run(self) -> Function:
        params = []
        for p in self.decl.params:
            r = self.reg(_IR_TYPE[p.type])
            self.scopes[0][p.name] = r
            params.append(r)
        self.start(self.new_block())
        self.block(self.decl.body, new_scope=False)
        if self.cur is not None:
            self.default_return()
        blocks = [self.built[b] for b in self.order if b in self.built]
        traps = []
        for bid, handler, kinds in self.pending_traps:
            if bid in self.built:
                n = len(self.built[bid].instrs)
                traps.append(TrapEntry(bid, 0, n + 1, handler, kinds))
        fn = Function(self.decl.name, params, _IR_TYPE[self.decl.ret_type], self.reg_types,
                      blocks, 0, traps)
        remove_unreachable(fn)
        renumber(fn)
        return fn

    def default_return(self) -> None:
        rt = self.decl.ret_type
        if rt == A.VOID_T:
            self.terminate("ret")
            return
        r = self.reg(_IR_TYPE[rt])
        if rt == A.ARR_T:
            self.emit("null", r)
        else:
            self.emit("const", r, 0)
        self.terminate("ret", r)

    # -- statements ----------------------------------------------------------------------
    def block(self, b: A.Block, new_scope: bool = True) -> None:
        if new_scope:
            self.scopes.append({})
        for s in b.stmts:
            self.stmt(s)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s) -> None:
        self.span = s.span
        if isinstance(s, A.Block):
            self.block(s)
        elif isinstance(s, A.VarDecl):
            r = self.reg(_IR_TYPE[s.type])
            if s.init is not None:
                self.expr(s.init, r)
            elif s.type == A.ARR_T:
                self.emit("null", r)
            else:
                self.emit("const", r, 0)
            self.scopes[-1][s.name] = r
        elif isinstance(s, A.Assign):
            if isinstance(s.target, A.Var):
                self.expr(s.value, self.lookup(s.target.name))
            else:
                a = self.expr(s.target.array)
                i = self.expr(s.target.index)
                v = self.expr(s.value)
                self.span = s.span
                self.emit("store", None, a, i, v)
        elif isinstance(s, A.ExprStmt):
            self.call_stmt(s.expr)
        elif isinstance(s, A.If):
            then_b = self.new_block()
            else_b = self.new_block() if s.orelse is not None else None
            join = self.new_block()
            self.cond(s.cond, then_b, else_b if else_b is not None else join)
            self.start(then_b)
            self.block(s.then)
            if self.cur is not None:
                self.jump(join)
            if else_b is not None:
                self.start(else_b)
                self.block(s.orelse)
                if self.cur is not None:
                    self.jump(join)
            self.start(join)
        elif isinstance(s, A.While):
            self.loop(s.cond, s.body, None)
        elif isinstance(s, A.For):
            self.scopes.append({})
            if s.init is not None:
                self.stmt(s.init)
            self.loop(s.cond, s.body, s.step)
            self.scopes.pop()
        elif isinstance(s, A.Switch):
            v = self.expr(s.subject)
            cases = [(c.value, self.new_block()) for c in s.cases]
            default = self.new_block() if s.default is not None else None
            join = self.new_block()
            self.span = s.span
            self.terminate("switch", v, tuple(cases), default if default is not None else join)
            self.jumps.append((join, None))
            bodies = [c.body for c in s.cases] + ([s.default] if s.default is not None else [])
            targets = [b for _, b in cases] + ([default] if default is not None else [])
            for body, target in zip(bodies, targets):
                self.start(target)
                self.block(body)
                if self.cur is not None:
                    self.jump(join)
            self.jumps.pop()
            self.start(join)
        elif isinstance(s, A.Break):
            self.jump(next(b for b, _ in reversed(self.jumps) if b is not None))
        elif isinstance(s, A.Continue):
            self.jump(next(c for _, c in reversed(self.jumps) if c is not None))
        elif isinstance(s, A.Return):
            if s.value is None:
                self.terminate("ret")
            else:
                r = self.expr(s.value)
                self.span = s.span
                self.terminate("ret", r)
        elif isinstance(s, A.Throw):
            r = self.expr(s.code)
            self.span = s.span
            self.terminate("throw", r)
        elif isinstance(s, A.Try):
            self.try_(s)
        else:  # pragma: no cover
            raise TypeError(f"cannot lower {type(s).__name__}")

    def loop(self, cond, body: A.Block, step) -> None:
        header = self.new_block()
        body_b = self.new_block()
        step_b = self.new_block() if step is not None else None
        exit_b = self.new_block()
        self.jump(header)
        self.start(header)
        if cond is None:
            self.jump(body_b)
        else:
            self.cond(cond, body_b, exit_b)
        self.start(body_b)
        self.jumps.append((exit_b, step_b if step_b is not None else header))
        self.block(body)
        self.jumps.pop()
        if self.cur is not None:
            self.jump(step_b if step_b is not None else header)
        if step_b is not None:
            self.start(step_b)
            self.stmt(step)
            self.jump(header)
        self.start(exit_b)

    def try_(self, s: A.Try) -> None:
        body_b = self.new_block()
        self.jump(body_b)
        first = len(self.order) - 1
        self.start(body_b)
        self.block(s.body)
        covered = self.order[first:]
        join = self.new_block()
        if self.cur is not None:
            self.jump(join)
        handlers = []
        for c in s.catches:
            h = self.new_block()
            kinds = ALL_KINDS if c.kinds is None else frozenset(c.kinds)
            handlers.append((h, kinds, c))
        for bid in covered:
            for h, kinds, _ in handlers:
                self.pending_traps.append((bid, h, kinds))
        for h, _, c in handlers:
            self.start(h)
            self.scopes.append({})
            r = self.reg(INT)
            if c.name is not None:
                self.scopes[-1][c.name] = r
            self.span = c.span
            self.emit("catch", r)
            self.block(c.body)
            self.scopes.pop()
            if self.cur is not None:
                self.jump(join)
        self.start(join)

    def call_stmt(self, e) -> None:
        if isinstance(e, A.Intrinsic) and e.name == "print":
            r = self.expr(e.args[0])
            self.emit("print", None, r)
        elif isinstance(e, A.Intrinsic) and e.name == "print_str":
            self.emit("print_str", None, e.args[0].value)
        elif isinstance(e, A.Call):
            args = tuple(self.expr(a) for a in e.args)
            self.emit("call", None, e.name, args)
        else:  # pragma: no cover
            self.expr(e)

    # -- conditions ------------------------------------------------------------------------
    def cond(self, e, t: int, f: int) -> None:
        if isinstance(e, A.Binary) and e.op == "&&":
            mid = self.new_block()
            self.cond(e.left, mid, f)
            self.start(mid)
            self.cond(e.right, t, f)
        elif isinstance(e, A.Binary) and e.op == "||":
            mid = self.new_block()
            self.cond(e.left, t, mid)
            self.start(mid)
            self.cond(e.right, t, f)
        elif isinstance(e, A.Unary) and e.op == "!":
            self.cond(e.operand, f, t)
        elif isinstance(e, A.BoolLit):
            self.jump(t if e.value else f)
        else:
            nullcheck = self.null_test(e)
            if nullcheck is not None:
                operand, negated = nullcheck
                r = self.reg(BOOL)
                self.emit("isnull", r, self.expr(operand))
                if negated:
                    t, f = f, t
                self.terminate("br", r, t, f)
            else:
                r = self.expr(e)
                self.terminate("br", r, t, f)

    @staticmethod
    def null_test(e):
        if isinstance(e, A.Binary) and e.op in ("==", "!="):
            if isinstance(e.right, A.NullLit) and not isinstance(e.left, A.NullLit):
                return e.left, e.op == "!="
            if isinstance(e.left, A.NullLit) and not isinstance(e.right, A.NullLit):
                return e.right, e.op == "!="
        return None

    # -- expressions -----------------------------------------------------------------------
    def expr(self, e, dst: int | None = None) -> int:
        """Evaluate ``e``; the result lands in ``dst`` when given."""
        def out(typ: str) -> int:
            return dst if dst is not None else self.reg(typ)

        if isinstance(e, A.IntLit):
            r = out(INT)
            self.emit("const", r, e.value)
            return r
        if isinstance(e, A.BoolLit):
            r = out(BOOL)
            self.emit("const", r, 1 if e.value else 0)
            return r
        if isinstance(e, A.NullLit):
            r = out(ARR)
            self.emit("null", r)
            return r
        if isinstance(e, A.ArrayLit):
            r = out(ARR)
            self.emit("arrlit", r, tuple(e.values))
            return r
        if isinstance(e, A.NewArray):
            n = self.expr(e.size)
            r = out(ARR)
            self.emit("newarr", r, n)
            return r
        if isinstance(e, A.Var):
            src = self.lookup(e.name)
            if dst is None or dst == src:
                return src
            self.emit("move", dst, src)
            return dst
        if isinstance(e, A.Index):
            a = self.expr(e.array)
            i = self.expr(e.index)
            r = out(INT)
            self.emit("load", r, a, i)
            return r
        if isinstance(e, A.Call):
            args = tuple(self.expr(a) for a in e.args)
            r = out(_IR_TYPE[self.sigs[e.name].ret_type])
            self.emit("call", r, e.name, args)
            return r
        if isinstance(e, A.Intrinsic):
            if e.name == "len":
                a = self.expr(e.args[0])
                r = out(INT)
                self.emit("len", r, a)
                return r
            if e.name == "min":
                x = self.expr(e.args[0])
                y = self.expr(e.args[1])
                r = out(INT)
                self.emit("min", r, x, y)
                return r
            raise TypeError(f"{e.name} has no value")  # pragma: no cover
        if isinstance(e, A.Unary):
            x = self.expr(e.operand)
            r = out(INT if e.op == "-" else BOOL)
            self.emit("neg" if e.op == "-" else "not", r, x)
            return r
        if isinstance(e, A.Binary):
            return self.binary(e, dst)
        raise TypeError(f"cannot lower {type(e).__name__}")  # pragma: no cover

    def binary(self, e: A.Binary, dst: int | None) -> int:
        if e.op in ("&&", "||"):
            if _pure(e.right):
                x = self.expr(e.left)
                y = self.expr(e.right)
                r = dst if dst is not None else self.reg(BOOL)
                self.emit("and" if e.op == "&&" else "or", r, x, y)
                return r
            r = dst if dst is not None else self.reg(BOOL)
            t, f, join = self.new_block(), self.new_block(), self.new_block()
            self.cond(e, t, f)
            self.start(t)
            self.emit("const", r, 1)
            self.jump(join)
            self.start(f)
            self.emit("const", r, 0)
            self.jump(join)
            self.start(join)
            return r
        nullcheck = self.null_test(e)
        if nullcheck is not None:
            operand, negated = nullcheck
            a = self.expr(operand)
            if negated:
                tmp = self.reg(BOOL)
                self.emit("isnull", tmp, a)
                r = dst if dst is not None else self.reg(BOOL)
                self.emit("not", r, tmp)
            else:
                r = dst if dst is not None else self.reg(BOOL)
                self.emit("isnull", r, a)
            return r
        x = self.expr(e.left)
        y = self.expr(e.right)
        if e.op in _COMPARES:
            typ = BOOL
        elif e.op == "^":
            typ = self.reg_types[x]
        else:
            typ = INT
        r = dst if dst is not None else self.reg(typ)
        self.emit(_BINOP[e.op], r, x, y)
        return r


def lower(unit: A.SourceUnit) -> Program:
    """Compile a checked unit to IR; the program keeps a reference to ``unit``."""
    sigs = {f.name: f for f in unit.functions}
    fns = [_FunctionLowering(f, sigs).run() for f in unit.functions]
    return Program(fns, "main", source=unit)
