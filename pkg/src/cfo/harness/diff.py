"""Differential testing of an original program against a transformed one."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..interpreter import CoverageMap, Interpreter, default_fuel
from ..ir.model import Program

INT_MIN, INT_MAX = -(1 << 63), (1 << 63) - 1
EDGE_INPUTS: tuple = (None, [], [1], [INT_MIN, INT_MAX])
FUEL_SCALE = 50

EQUAL, MISMATCH, ORIGINAL_FUEL_EXHAUSTED = "equal", "mismatch", "original_fuel_exhausted"


def standard_inputs(n: int, seed: int = 0) -> list:
    """``n`` inputs: the edge set first, then seeded random arrays (some sorted, some with the key 10)."""
    rng = random.Random(f"inputs:{seed}")
    out: list = list(EDGE_INPUTS[:n])
    while len(out) < n:
        size = rng.randint(0, 9)
        r = rng.random()
        if r < 0.1:
            arr = [rng.choice([INT_MIN, INT_MAX, 0, -1, 1]) for _ in range(size)]
        else:
            arr = [rng.randint(-50, 50) for _ in range(size)]
        if r > 0.6:
            arr.sort()
        if r > 0.8 and arr:
            arr[rng.randrange(len(arr))] = 10
            arr.sort()
        out.append(arr)
    return out


@dataclass
class Divergence:
    input: list | None
    position: int  # index of the first differing output item; len(output) when only outcomes differ
    original: str
    transformed: str

    def to_dict(self) -> dict:
        return {"input": self.input, "position": self.position,
                "original": self.original, "transformed": self.transformed}


@dataclass
class DiffVerdict:
    status: str
    first_divergence: Divergence | None = None
    inputs_compared: int = 0
    skipped: int = 0

    @property
    def equal(self) -> bool:
        return self.status == EQUAL

    def to_dict(self) -> dict:
        return {"status": self.status, "inputs_compared": self.inputs_compared,
                "skipped": self.skipped,
                "first_divergence": None if self.first_divergence is None
                else self.first_divergence.to_dict()}


def _divergence(x, a, b) -> Divergence:
    for k, (p, q) in enumerate(zip(a.output, b.output)):
        if p != q:
            return Divergence(x, k, p, q)
    k = min(len(a.output), len(b.output))
    if len(a.output) != len(b.output):
        mine = a.output[k] if len(a.output) > k else f"<end: {a.outcome}>"
        theirs = b.output[k] if len(b.output) > k else f"<end: {b.outcome}>"
        return Divergence(x, k, mine, theirs)
    return Divergence(x, k, str(a.outcome), str(b.outcome))


def differential_test(original: Program, transformed: Program, n_inputs: int = 20,
                      seed: int = 0, fuel: int | None = None, inputs: list | None = None) -> DiffVerdict:
    """Run both programs on the same inputs and compare outcomes and full output streams.

    Inputs where the original runs out of fuel are skipped; if every input
    is skipped the verdict is ``original_fuel_exhausted``.
    """
    fuel = fuel or default_fuel()
    xs = standard_inputs(n_inputs, seed) if inputs is None else inputs
    left, right = Interpreter(original), Interpreter(transformed)
    compared = skipped = 0
    for x in xs:
        a = left.run(x, fuel)
        if a.outcome.kind == "fuel_exhausted":
            skipped += 1
            continue
        b = right.run(x, fuel * FUEL_SCALE)
        compared += 1
        if a.outcome != b.outcome or a.output != b.output:
            return DiffVerdict(MISMATCH, _divergence(x, a, b), compared, skipped)
    if compared == 0:
        return DiffVerdict(ORIGINAL_FUEL_EXHAUSTED, None, 0, skipped)
    return DiffVerdict(EQUAL, None, compared, skipped)


@dataclass
class DeadCoverage:
    clean: bool
    executed: list[tuple[str, int, int]] = field(default_factory=list)  # (function, block, index)
    dead_instructions: int = 0


def dead_sites(program: Program) -> list[tuple[str, int, int]]:
    out = []
    for fn in program.functions:
        for b in fn.blocks:
            for i, ins in enumerate(b.instrs + [b.term]):
                if ins.tag == "dead":
                    out.append((fn.name, b.id, i))
    return out


def dead_code_coverage_check(transformed: Program, inputs: list, fuel: int | None = None) -> DeadCoverage:
    """Clean iff no ``dead``-tagged instruction executes on any of ``inputs``."""
    sites = dead_sites(transformed)
    total = CoverageMap()
    interp = Interpreter(transformed)
    for x in inputs:
        interp.run(x, (fuel or default_fuel()) * FUEL_SCALE, coverage=True)
        total.merge(interp.coverage_map())
    hit = [s for s in sites if total[s] > 0]
    return DeadCoverage(not hit, hit, len(sites))
