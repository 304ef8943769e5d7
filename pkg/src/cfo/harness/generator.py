"""Random MiniLang programs with a controlled feature set.

Programs are built as source text and parsed back, so every generated unit
is exactly what a user could have written. Loops only count up to small
constants or over the input array, helpers never call each other, and there
is no recursion, so every program terminates.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..frontend import ast as A
from ..frontend import compile_source, parse
from ..interpreter import run
from ..ir import verify

FEATURES = ("if", "if_else", "while", "for", "switch", "nested_conditionals", "try_catch",
            "arrays", "multi_function", "reads_input")
CONTROL = ("if", "if_else", "while", "for", "switch", "try_catch")
_PROBE_INPUTS = (None, [], [7], [-(1 << 63), (1 << 63) - 1], [3, 1, 4, 1, 5, 9, 2, 6])


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_functions: int = 3
    max_blocks_per_function: int = 128
    max_loop_depth: int = 3
    feature_mask: frozenset = field(default_factory=lambda: frozenset(FEATURES))

    def __post_init__(self):
        object.__setattr__(self, "feature_mask", frozenset(self.feature_mask))
        unknown = self.feature_mask - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        if not 0 <= self.max_loop_depth <= 3:
            raise ValueError("max_loop_depth must be within 0..3")
        if self.max_functions < 1 or self.max_blocks_per_function < 4:
            raise ValueError("max_functions >= 1 and max_blocks_per_function >= 4 required")
        if "multi_function" in self.feature_mask and self.max_functions < 2:
            raise ValueError("multi_function needs max_functions >= 2")
        if "nested_conditionals" in self.feature_mask:
            if not set(CONTROL) & self.feature_mask:
                raise ValueError("nested_conditionals needs at least one control construct")
            if self.max_loop_depth < 2:
                raise ValueError("nested_conditionals needs max_loop_depth >= 2")


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg, self.rng = cfg, rng
        self.on = cfg.feature_mask
        self.lines: list[str] = []
        self.counter = 0
        self.helpers: list[str] = []

    # -- naming and emission ------------------------------------------------------------------
    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    def put(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    # -- expressions ------------------------------------------------------------------------
    def atom(self, scope: "_Scope") -> str:
        r = self.rng.random()
        if r < 0.45 and scope.ints:
            return self.rng.choice(scope.ints)
        if r < 0.55 and scope.counters:
            return self.rng.choice(scope.counters)
        if r < 0.62 and scope.arrays:
            a, size = self.rng.choice(scope.arrays)
            return f"{a}[{self.rng.randrange(size)}]"
        if r < 0.67 and scope.reads_input:
            return "len(args)"
        return str(self.rng.randint(-20, 40))

    def expr(self, scope: "_Scope", depth: int = 0) -> str:
        if depth >= 2 or self.rng.random() < 0.4:
            return self.atom(scope)
        r = self.rng.random()
        a, b = self.expr(scope, depth + 1), self.expr(scope, depth + 1)
        if r < 0.55:
            return f"({a} {self.rng.choice('+-*')} {b})"
        if r < 0.7:
            return f"({a} {self.rng.choice('/%')} {self.rng.choice([2, 3, 5, 7, -3])})"
        if r < 0.8:
            return f"min({a}, {b})"
        if r < 0.9 and self.helpers and scope.in_main:
            h = self.rng.choice(self.helpers)
            return f"{h}({a}, {b})"
        return f"(-{a})" if not a.startswith("-") else a

    def cond(self, scope: "_Scope") -> str:
        c = f"{self.expr(scope)} {self.rng.choice(['<', '<=', '>', '>=', '==', '!='])} {self.expr(scope)}"
        r = self.rng.random()
        if r < 0.15 and scope.bools:
            c = f"{c} && {self.rng.choice(scope.bools)}"
        elif r < 0.3:
            c = f"{c} || {self.atom(scope)} > {self.rng.randint(-5, 5)}"
        elif r < 0.4:
            c = f"!({c})"
        return c

    # -- statements ---------------------------------------------------------------------------
    def simple(self, scope: "_Scope", depth: int) -> None:
        r = self.rng.random()
        if r < 0.35 and scope.ints:
            self.put(depth, f"{self.rng.choice(scope.ints)} = {self.expr(scope)};")
        elif r < 0.5 and scope.ints:
            self.put(depth, f"{self.rng.choice(scope.ints)} {self.rng.choice(['+=', '-=', '*='])} {self.expr(scope)};")
        elif r < 0.6 and scope.bools:
            self.put(depth, f"{self.rng.choice(scope.bools)} = {self.cond(scope)};")
        elif r < 0.72 and scope.arrays:
            a, size = self.rng.choice(scope.arrays)
            idx = str(self.rng.randrange(size))
            if scope.counters and self.rng.random() < 0.5:
                idx = f"{self.rng.choice(scope.counters)} % {size}"
            self.put(depth, f"{a}[{idx}] = {self.expr(scope)};")
        else:
            self.put(depth, f"print({self.expr(scope)});")

    def construct(self, kind: str, scope: "_Scope", depth: int, nest: int,
                  inner: str | None = None) -> None:
        """Emit one ``kind`` statement; ``nest`` is how many more constructs may sit inside it.

        ``inner`` forces a construct of that kind into the first nested body.
        """
        rng = self.rng
        if kind in ("if", "if_else"):
            self.put(depth, f"if ({self.cond(scope)}) {{")
            self.body(scope, depth + 1, nest, inner)
            if kind == "if_else":
                self.put(depth, "} else {")
                self.body(scope, depth + 1, nest)
            self.put(depth, "}")
        elif kind == "for":
            i = self.fresh("i")
            bound = "len(args)" if scope.reads_input and rng.random() < 0.5 else str(rng.randint(0, 4))
            self.put(depth, f"for (int {i} = 0; {i} < {bound}; {i}++) {{")
            sub = scope.child(counter=i)
            if bound == "len(args)" and sub.ints:
                self.put(depth + 1, f"{rng.choice(sub.ints)} += args[{i}];")
            self.body(sub, depth + 1, nest, inner)
            self.put(depth, "}")
        elif kind == "while":
            w = self.fresh("w")
            self.put(depth, f"int {w} = 0;")
            self.put(depth, f"while ({w} < {rng.randint(0, 4)}) {{")
            self.body(scope.child(counter=w), depth + 1, nest, inner)
            self.put(depth + 1, f"{w} = {w} + 1;")
            self.put(depth, "}")
        elif kind == "switch":
            self.put(depth, f"switch ({self.expr(scope)} % {rng.randint(2, 4)}) {{")
            for n, k in enumerate(rng.sample(range(-1, 4), rng.randint(1, 3))):
                self.put(depth + 1, f"case {k}:")
                self.body(scope, depth + 2, nest, inner if n == 0 else None)
            if rng.random() < 0.7:
                self.put(depth + 1, "default:")
                self.body(scope, depth + 2, nest)
            self.put(depth, "}")
        elif kind == "try_catch":
            self.put(depth, "try {")
            self.body(scope, depth + 1, nest, inner)
            risky = rng.randrange(3)
            target = rng.choice(scope.ints) if scope.ints else None
            if risky == 0 and target:
                self.put(depth + 1, f"{target} = {target} / ({self.expr(scope)} % 3);")
            elif risky == 1 and scope.arrays:
                a, size = rng.choice(scope.arrays)
                self.put(depth + 1, f"print({a}[{self.expr(scope)} % {size + 2}]);")
            else:
                nested = "if" in self.on and "nested_conditionals" in self.on
                self.put(depth + 1, f"if ({self.cond(scope)}) {{" if nested else "{")
                self.put(depth + 2, f"throw({rng.randint(1, 9)});")
                self.put(depth + 1, "}")
            kinds = rng.choice(["DivByZero", "IndexOutOfBounds | User", "", "User"])
            e = self.fresh("e")
            self.put(depth, f"}} catch {kinds} ({e}) {{".replace("catch  (", "catch ("))
            self.put(depth + 1, f"print({e});")
            if rng.random() < 0.5:
                self.body(scope, depth + 1, 0)
            if kinds:
                self.put(depth, "} catch {")
                self.put(depth + 1, 'print_str("other");')
            self.put(depth, "}")

    def body(self, scope: "_Scope", depth: int, nest: int, inner: str | None = None) -> None:
        """A short statement list, with nested constructs only while ``nest`` allows."""
        if inner is not None:
            self.construct(inner, scope, depth, max(0, nest - 1))
        for _ in range(self.rng.randint(0 if inner else 1, 3)):
            kinds = [k for k in CONTROL if k in self.on]
            if nest > 0 and kinds and "nested_conditionals" in self.on and self.rng.random() < 0.35:
                self.construct(self.rng.choice(kinds), scope, depth, nest - 1)
            else:
                self.simple(scope, depth)

    def function_body(self, scope: "_Scope", required: list[str]) -> None:
        rng = self.rng
        nest = self.cfg.max_loop_depth - 1 if "nested_conditionals" in self.on else 0
        todo = list(required)
        rng.shuffle(todo)
        allowed = [k for k in CONTROL if k in self.on]
        # roughly 12 lowered blocks per construct; gen_program enforces the real limit
        spare = max(0, self.cfg.max_blocks_per_function // 12 - len(todo))
        for _ in range(rng.randint(0, spare)):
            if allowed:
                todo.append(rng.choice(allowed))
        for kind in todo:
            if kind == "nested_conditionals":
                self.construct(rng.choice(allowed), scope, 1, nest, inner=rng.choice(allowed))
            else:
                self.construct(kind, scope, 1, nest)
            if rng.random() < 0.5:
                self.simple(scope, 1)

    def declare(self, scope: "_Scope", depth: int, params: list[str] = ()) -> None:
        names = [self.fresh("v") for _ in range(self.rng.randint(2, 3))]
        init = [p for p in params] + [str(self.rng.randint(-9, 30)) for _ in names[len(params):]]
        self.put(depth, "int " + ", ".join(f"{n} = {v}" for n, v in zip(names, init)) + ";")
        scope.ints += names
        b = self.fresh("b")
        self.put(depth, f"bool {b} = {self.cond(scope)};")
        scope.bools.append(b)
        if "arrays" in self.on:
            a = self.fresh("a")
            if self.rng.random() < 0.5:
                size = self.rng.randint(2, 5)
                self.put(depth, f"int[] {a} = new int[{size}];")
            else:
                vals = [self.rng.randint(-9, 9) for _ in range(self.rng.randint(2, 5))]
                size = len(vals)
                self.put(depth, f"int[] {a} = {{{', '.join(map(str, vals))}}};")
            scope.arrays.append((a, size))

    def helper(self, name: str, required: list[str]) -> None:
        self.put(0, f"fn {name}(p: int, q: int) -> int {{")
        scope = _Scope(in_main=False, reads_input=False)
        self.declare(scope, 1, ["p", "q"])
        self.function_body(scope, required)
        self.put(1, f"return {' + '.join(scope.ints)};")
        self.put(0, "}")
        self.put(0, "")

    def program(self) -> str:
        rng = self.rng
        required = [k for k in CONTROL if k in self.on]
        if "nested_conditionals" in self.on:
            required.append("nested_conditionals")
        if "multi_function" in self.on:
            for _ in range(rng.randint(1, self.cfg.max_functions - 1)):
                name = self.fresh("helper")
                own = [k for k in required if rng.random() < 0.3]
                self.helper(name, own)
                self.helpers.append(name)
        self.put(0, "fn main(args: int[]) -> int {")
        scope = _Scope(in_main=True, reads_input="reads_input" in self.on)
        self.declare(scope, 1)
        if scope.reads_input:
            self.put(1, f"{scope.ints[0]} = len(args);")
        if self.helpers:
            # at least one call per helper
            for h in self.helpers:
                self.put(1, f"{rng.choice(scope.ints)} = {h}({self.atom(scope)}, {self.atom(scope)});")
        self.function_body(scope, required)
        for v in scope.ints:
            self.put(1, f"print({v});")
        self.put(1, f"return {scope.ints[-1]};")
        self.put(0, "}")
        return "\n".join(self.lines) + "\n"


@dataclass
class _Scope:
    in_main: bool
    reads_input: bool
    ints: list[str] = field(default_factory=list)
    bools: list[str] = field(default_factory=list)
    arrays: list[tuple[str, int]] = field(default_factory=list)
    counters: list[str] = field(default_factory=list)

    def child(self, counter: str) -> "_Scope":
        # while counters are read but never assigned by generated statements
        return _Scope(self.in_main, self.reads_input, self.ints, self.bools, self.arrays,
                      self.counters + [counter])


def features_used(unit: A.SourceUnit) -> set[str]:
    """Features of the generator vocabulary that ``unit`` actually contains."""
    used: set[str] = set()
    for fn in unit.functions:
        for n in fn.body.walk():
            if isinstance(n, A.If):
                used.add("if_else" if n.orelse is not None else "if")
            elif isinstance(n, A.While):
                used.add("while")
            elif isinstance(n, A.For):
                used.add("for")
            elif isinstance(n, A.Switch):
                used.add("switch")
            elif isinstance(n, A.Try):
                used.add("try_catch")
            elif isinstance(n, (A.NewArray, A.ArrayLit)):
                used.add("arrays")
            elif isinstance(n, A.Var) and n.name == "args" and fn.name == "main":
                used.add("reads_input")
        if A.max_nesting(fn.body) >= 2:
            used.add("nested_conditionals")
    if len(unit.functions) > 1:
        used.add("multi_function")
    return used


def gen_program(config: GenConfig) -> A.SourceUnit:
    """A terminating, verify-clean program using exactly the features in ``config.feature_mask``."""
    for attempt in range(1000):
        rng = random.Random(f"gen:{config.seed}:{attempt}")
        text = _Gen(config, rng).program()
        unit = parse(text, f"gen-{config.seed}.mini")
        if features_used(unit) != set(config.feature_mask):
            continue
        if any(A.max_nesting(f.body) > max(1, config.max_loop_depth) for f in unit.functions):
            continue
        program = compile_source(text, unit.path)
        if verify(program):
            continue
        if any(len(f.blocks) > config.max_blocks_per_function for f in program.functions):
            continue
        if any(run(program, x, fuel=200_000).outcome.kind == "fuel_exhausted" for x in _PROBE_INPUTS):
            continue
        return unit
    raise RuntimeError(f"could not generate a program for {config}")  # pragma: no cover
