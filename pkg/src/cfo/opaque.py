"""Opaque predicates and opaque values.

Every family is a trap-free, memory-free expression over one integer input.
Because registers are always initialized, any integer register of a function
is a valid input, so passes can feed predicates with live program values.

Validity under 64-bit wrapping is argued family by family in
``docs/predicates.md``; :func:`verify_predicate_exhaustive` checks each
family over a full small domain and :func:`spot_check` over hand-picked
wide values that expose wrap-around bugs.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .interpreter import tdiv, trem, wrap
from .ir.model import BOOL, INT, Function, Instr

ALWAYS_TRUE, ALWAYS_FALSE, CONTEXTUAL = "always_true", "always_false", "contextual"
TRUTHS = (ALWAYS_TRUE, ALWAYS_FALSE, CONTEXTUAL)
MAX_EVALUATIONS = 1 << 24


@dataclass(frozen=True)
class Term:
    """Expression tree node: ``var`` (input ``value``), ``const`` or an IR binary opcode."""

    op: str
    args: tuple["Term", ...] = ()
    value: int = 0

    def __str__(self) -> str:
        if self.op == "var":
            return "v" if self.value == 0 else f"v{self.value}"
        if self.op == "const":
            return str(self.value)
        sym = _SYMBOLS[self.op]
        return f"({self.args[0]} {sym} {self.args[1]})"

    def variables(self) -> list[int]:
        if self.op == "var":
            return [self.value]
        out: list[int] = []
        for a in self.args:
            for v in a.variables():
                if v not in out:
                    out.append(v)
        return out

    def ops(self) -> list[str]:
        out = [self.op]
        for a in self.args:
            out.extend(a.ops())
        return out


_SYMBOLS = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "rem": "%", "and": "&", "or": "|",
    "xor": "^", "eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
}
_COMPARE = ("eq", "ne", "lt", "le", "gt", "ge")


def V(i: int = 0) -> Term:
    return Term("var", (), i)


def C(k: int) -> Term:
    return Term("const", (), k)


def B(op: str, a: Term, b: Term) -> Term:
    return Term(op, (a, b))


@dataclass(frozen=True)
class PredicateExpr:
    truth: str
    family: str
    template: Term
    # register bound to each template variable; None asks the pass for a fresh one
    fresh_inputs: tuple[int | None, ...]

    def __str__(self) -> str:
        return str(self.template)


@dataclass(frozen=True)
class OpaqueValue:
    value: int
    expression: Term
    inputs: tuple[int | None, ...]


@dataclass(frozen=True)
class Family:
    name: str
    truth: str
    build: object  # callable(rng) -> Term, varies operand order by seed
    proof: str  # section anchor in docs/predicates.md


def _maybe_swap(rng: random.Random, op: str, a: Term, b: Term) -> Term:
    return B(op, b, a) if rng.random() < 0.5 else B(op, a, b)


def _v_plus_1(rng: random.Random) -> Term:
    return _maybe_swap(rng, "add", V(), C(1))


def _parity_product(rng: random.Random) -> Term:
    return _maybe_swap(rng, "mul", V(), _v_plus_1(rng))


def _square(rng: random.Random) -> Term:
    return B("mul", V(), V())


FAMILIES: tuple[Family, ...] = (
    Family("parity", ALWAYS_TRUE,
           lambda g: B("eq", B("rem", _parity_product(g), C(2)), C(0)), "parity"),
    Family("square_mod4", ALWAYS_TRUE,
           lambda g: B("le", B("rem", _square(g), C(4)), C(1)), "square_mod4"),
    Family("odd_or", ALWAYS_TRUE,
           lambda g: B("ne", B("rem", _maybe_swap(g, "or", V(), C(1)), C(2)), C(0)), "odd_or"),
    Family("cube_minus_self", ALWAYS_TRUE,
           lambda g: B("eq", B("rem", B("sub", B("mul", _square(g), V()), V()), C(2)), C(0)),
           "cube_minus_self"),
    Family("remainder", ALWAYS_FALSE,
           lambda g: B("eq", B("rem", V(), C(2)), C(2)), "remainder"),
    Family("square_mod4_eq2", ALWAYS_FALSE,
           lambda g: B("eq", B("rem", _square(g), C(4)), C(2)), "square_mod4_eq2"),
    Family("parity_odd", ALWAYS_FALSE,
           lambda g: B("eq", B("rem", _parity_product(g), C(2)), C(1)), "parity_odd"),
    Family("double_odd", ALWAYS_FALSE,
           lambda g: B("eq", B("and", _maybe_swap(g, "add", V(), V()), C(1)), C(1)), "double_odd"),
)

# Candidate families that fail validation; kept to exercise the checkers.
REJECTED: tuple[Family, ...] = (
    Family("square_nonneg", ALWAYS_TRUE, lambda g: B("ge", _square(g), C(0)), "square_nonneg"),
)

_CONTEXTUAL = (
    Family("input_parity", CONTEXTUAL, lambda g: B("eq", B("rem", V(), C(2)), C(0)), "contextual"),
    Family("input_sign", CONTEXTUAL, lambda g: B("lt", V(), C(0)), "contextual"),
)


def families(truth: str | None = None) -> list[Family]:
    pool = FAMILIES + _CONTEXTUAL
    return [f for f in pool if truth is None or f.truth == truth]


def family(name: str) -> Family:
    for f in FAMILIES + _CONTEXTUAL + REJECTED:
        if f.name == name:
            return f
    raise KeyError(name)


def gen_predicate(truth: str, seed: int, source_registers=(), family_name: str | None = None) -> PredicateExpr:
    """Pick a family of the requested truth class and vary it by ``seed``.

    The input is drawn from ``source_registers`` when any are given;
    otherwise the caller must allocate a fresh register.
    """
    if truth not in TRUTHS:
        raise ValueError(f"unknown truth class {truth!r}")
    rng = random.Random(f"predicate:{truth}:{seed}")
    pool = families(truth)
    fam = family(family_name) if family_name else pool[rng.randrange(len(pool))]
    template = fam.build(rng)
    regs = list(source_registers)
    inp = regs[rng.randrange(len(regs))] if regs else None
    return PredicateExpr(fam.truth, fam.name, template, (inp,))


def gen_opaque_value(value: int, seed: int, source_registers=()) -> OpaqueValue:
    """An expression that always yields ``value`` (0 or 1)."""
    rng = random.Random(f"value:{value}:{seed}")
    if value == 1:
        expr = B("and", _maybe_swap(rng, "or", V(), C(1)), C(1))
    elif value == 0:
        expr = B("rem", _parity_product(rng), C(2))
    else:
        raise ValueError("opaque values are 0 or 1")
    regs = list(source_registers)
    inp = regs[rng.randrange(len(regs))] if regs else None
    return OpaqueValue(value, expr, (inp,))


# -- evaluation ---------------------------------------------------------------------

def evaluate(term: Term, env: list[int]) -> int:
    """Evaluate with 64-bit wrapping semantics identical to the interpreter."""
    op = term.op
    if op == "var":
        return env[term.value]
    if op == "const":
        return term.value
    a = evaluate(term.args[0], env)
    b = evaluate(term.args[1], env)
    if op == "add":
        return wrap(a + b)
    if op == "sub":
        return wrap(a - b)
    if op == "mul":
        return wrap(a * b)
    if op == "div":
        return wrap(tdiv(a, b))
    if op == "rem":
        return trem(a, b)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    return int({"eq": a == b, "ne": a != b, "lt": a < b, "le": a <= b,
                "gt": a > b, "ge": a >= b}[op])


def _evaluate_np(term: Term, env: list[np.ndarray]) -> np.ndarray:
    op = term.op
    if op == "var":
        return env[term.value]
    if op == "const":
        return np.int64(term.value)
    a = _evaluate_np(term.args[0], env)
    b = _evaluate_np(term.args[1], env)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "rem":
        return np.fmod(a, b)  # sign follows the dividend, like truncated remainder
    if op == "div":
        return (a - np.fmod(a, b)) // b
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    cmp = {"eq": np.equal, "ne": np.not_equal, "lt": np.less, "le": np.less_equal,
           "gt": np.greater, "ge": np.greater_equal}[op]
    return cmp(a, b).astype(np.int64)


@dataclass(frozen=True)
class PredicateVerdict:
    holds: bool
    counterexample: tuple[int, ...] | None = None
    evaluations: int = 0


class DomainTooLarge(ValueError):
    pass


def verify_predicate_exhaustive(pred: PredicateExpr | Term, domain_bits: int = 16,
                                truth: str | None = None) -> PredicateVerdict:
    """Evaluate over every sign-extended ``domain_bits``-bit assignment of the inputs."""
    template = pred.template if isinstance(pred, PredicateExpr) else pred
    truth = truth or (pred.truth if isinstance(pred, PredicateExpr) else None)
    if truth not in (ALWAYS_TRUE, ALWAYS_FALSE):
        raise ValueError("only constant truth classes can be verified")
    nvars = max(template.variables(), default=-1) + 1
    if nvars > 2 or domain_bits > 20 or (1 << (domain_bits * max(nvars, 1))) > MAX_EVALUATIONS:
        raise DomainTooLarge(f"{nvars} inputs at {domain_bits} bits exceeds 2^24 evaluations")
    lo, hi = -(1 << (domain_bits - 1)), 1 << (domain_bits - 1)
    axis = np.arange(lo, hi, dtype=np.int64)
    if nvars <= 1:
        grids = [axis]
    else:
        g0, g1 = np.meshgrid(axis, axis, indexing="ij")
        grids = [g0.ravel(), g1.ravel()]
    with np.errstate(over="ignore"):
        result = np.broadcast_to(_evaluate_np(template, grids), grids[0].shape)
    want = 1 if truth == ALWAYS_TRUE else 0
    bad = np.nonzero(result != want)[0]
    n = grids[0].size
    if bad.size:
        k = int(bad[0])
        return PredicateVerdict(False, tuple(int(g[k]) for g in grids), n)
    return PredicateVerdict(True, None, n)


# values around the 32-bit and 64-bit boundaries and the square-overflow point
SPOT_VALUES: tuple[int, ...] = (
    0, 1, -1, 2, -2, 3, 7, 65535, 65536, -65536, (1 << 31) - 1, 1 << 31, -(1 << 31),
    (1 << 32) - 1, 1 << 32, 3037000499, 3037000500, -3037000500, 4294967297,
    (1 << 62), (1 << 63) - 1, -(1 << 63), -(1 << 63) + 1, (1 << 63) - 2,
)


def spot_check(pred: PredicateExpr | Term, truth: str | None = None) -> PredicateVerdict:
    """Evaluate on :data:`SPOT_VALUES` under exact 64-bit semantics."""
    template = pred.template if isinstance(pred, PredicateExpr) else pred
    truth = truth or pred.truth
    want = 1 if truth == ALWAYS_TRUE else 0
    nvars = max(template.variables(), default=-1) + 1
    count = 0
    for v in SPOT_VALUES:
        env = [v] * max(nvars, 1)
        count += 1
        if evaluate(template, env) != want:
            return PredicateVerdict(False, tuple(env), count)
    return PredicateVerdict(True, None, count)


# -- materialization --------------------------------------------------------------------

def materialize(term: Term, fn: Function, inputs, tag: str = "opaque",
                result_type: str | None = None) -> tuple[list[Instr], int]:
    """Lower ``term`` into fresh registers of ``fn``; return (instructions, result register).

    ``inputs[i]`` is the register for variable ``i``; ``None`` allocates a
    fresh integer register, which starts out as 0 but is never written.
    """
    regs = list(inputs)
    for i, r in enumerate(regs):
        if r is None:
            regs[i] = fn.new_reg(INT)
    out: list[Instr] = []

    def go(t: Term, top: bool) -> int:
        if t.op == "var":
            return regs[t.value]
        if t.op == "const":
            r = fn.new_reg(INT)
            out.append(Instr("const", r, (t.value,), tag))
            return r
        a = go(t.args[0], False)
        b = go(t.args[1], False)
        typ = BOOL if t.op in _COMPARE else INT
        if top and result_type is not None:
            typ = result_type
        r = fn.new_reg(typ)
        out.append(Instr(t.op, r, (a, b), tag))
        return r

    result = go(term, True)
    return out, result


def int_registers(fn: Function) -> list[int]:
    return [r for r, t in enumerate(fn.reg_types) if t in (INT, BOOL)]


def predicate_table() -> list[dict]:
    """Shipped families with truth class and proof reference, for the catalog listing."""
    rows = []
    for f in FAMILIES + _CONTEXTUAL:
        rows.append({
            "family": f.name,
            "truth": f.truth,
            "template": str(f.build(random.Random(0))),
            "proof": f"docs/predicates.md#{f.proof}",
        })
    return rows
