"""Pass registry, configuration and the pipeline driver.

Every pass is a function ``run(ctx, program) -> list[str]`` that edits a
private clone of the program in place and returns descriptors of the sites
it transformed. The engine owns cloning, verification and ordering.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .. import catalog
from ..ir.model import Program
from ..ir.verify import verify

INTENSITIES = ("light", "normal", "aggressive")

# sites per function for passes that insert new code at block boundaries
_INSERTION_BUDGET = {"light": 1, "normal": 3, "aggressive": 6}


class TransformError(Exception):
    """A pass refused its input; ``code`` is the stable error name."""

    code = "transform_error"

    def __init__(self, message: str = "", code: str | None = None):
        super().__init__(message or (code or self.code))
        if code is not None:
            self.code = code


class NoEligibleSites(TransformError):
    code = "no_eligible_sites"


class InvalidParam(TransformError):
    code = "invalid_param"


class UnsupportedFeature(TransformError):
    code = "unsupported_feature"

    def __init__(self, feature: str, message: str = ""):
        super().__init__(message or f"unsupported_feature({feature})")
        self.feature = feature


class UnsupportedTraps(TransformError):
    code = "unsupported_traps"


class IneligibleSite(TransformError):
    code = "ineligible_site"


class RegionError(TransformError):
    """Raised by region outlining: empty_region, region_crosses_trap, region_contains_terminator."""


class InterleaveError(TransformError):
    """Raised by function interleaving: signature_mismatch or self_interleave."""


class PassInvariantError(Exception):
    """A pass produced an ill-formed program. This is a bug, not a user error."""


@dataclass
class PassConfig:
    seed: int = 0
    intensity: str = "normal"
    site_fraction: Fraction | float = 1
    pass_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.intensity not in INTENSITIES:
            raise InvalidParam(f"unknown intensity {self.intensity!r}")
        if not 0 < self.site_fraction <= 1:
            raise InvalidParam("site_fraction must lie in (0, 1]")


@dataclass
class TransformResult:
    program: Program
    sites: list[str]
    notes: list[str]


@dataclass(frozen=True)
class PassSpec:
    id: str
    run: Callable
    ast_level: bool = False
    variants: tuple[str, ...] = ()
    # parameter name -> validator returning an error message or None
    params: dict = field(default_factory=dict)
    insertion: bool = False

    @property
    def record(self) -> catalog.TechniqueRecord:
        return catalog.classify(self.id)

    @property
    def dr(self) -> bool:
        return self.record.dr


_PASSES: dict[str, PassSpec] = {}


def register(pass_id: str, *, ast_level: bool = False, variants: tuple[str, ...] = (),
             params: dict | None = None, insertion: bool = False):
    def deco(fn: Callable) -> Callable:
        _PASSES[pass_id] = PassSpec(pass_id, fn, ast_level, variants, params or {}, insertion)
        return fn
    return deco


def pass_spec(pass_id: str) -> PassSpec:
    base = catalog.pass_base(pass_id)
    if base not in _PASSES:
        raise KeyError(pass_id)
    return _PASSES[base]


def pass_ids() -> list[str]:
    """Runnable pass ids in registry order."""
    return [p for p in catalog.implemented_pass_ids() if p in _PASSES]


def variant_ids() -> list[str]:
    out = []
    for p in pass_ids():
        out.extend(f"{p}:{v}" for v in _PASSES[p].variants)
    return out


def is_known(pass_id: str) -> bool:
    base, _, variant = pass_id.partition(":")
    spec = _PASSES.get(base)
    return spec is not None and (not variant or variant in spec.variants)


def int_param(lo: int, hi: int | None = None):
    def check(v) -> str | None:
        if isinstance(v, bool) or not isinstance(v, int):
            return "must be an integer"
        if v < lo or (hi is not None and v > hi):
            return f"must lie in [{lo}, {'inf' if hi is None else hi}]"
        return None
    return check


class Context:
    """Per-application state handed to a pass: config, variant and a seeded RNG."""

    def __init__(self, spec: PassSpec, pass_id: str, variant: str | None, config: PassConfig):
        self.spec = spec
        self.pass_id = pass_id
        self.variant = variant
        self.config = config
        self.rng = random.Random(f"{pass_id}:{config.seed}")
        self.notes: list[str] = []

    def param(self, name: str, default):
        return self.config.pass_params.get(name, default)

    def seed(self) -> int:
        return self.rng.getrandbits(32)

    def select(self, sites: list) -> list:
        """Seeded subset of ``sites`` of size ceil(fraction * n), in original order."""
        if not sites:
            return []
        n = max(1, math.ceil(Fraction(self.config.site_fraction) * len(sites)))
        if n >= len(sites):
            return list(sites)
        keep = sorted(self.rng.sample(range(len(sites)), n))
        return [sites[i] for i in keep]

    def budget(self) -> int:
        return _INSERTION_BUDGET[self.config.intensity]

    def pick(self, sites: list, limit: int | None = None) -> list:
        """``select`` then keep at most ``limit`` (seeded) sites."""
        chosen = self.select(sites)
        if limit is not None and len(chosen) > limit:
            keep = sorted(self.rng.sample(range(len(chosen)), limit))
            chosen = [chosen[i] for i in keep]
        return chosen

    def note(self, tag: str) -> None:
        if tag not in self.notes:
            self.notes.append(tag)


def _split_id(pass_id: str, config: PassConfig) -> tuple[PassSpec, str | None]:
    base, _, variant = pass_id.partition(":")
    spec = _PASSES.get(base)
    if spec is None:
        raise KeyError(pass_id)
    variant = variant or config.pass_params.get("variant")
    if variant is not None and variant not in spec.variants:
        raise InvalidParam(f"{base}: unknown variant {variant!r}")
    return spec, variant


def _check_params(spec: PassSpec, config: PassConfig) -> None:
    for name, value in config.pass_params.items():
        if name == "variant":
            continue
        check = spec.params.get(name)
        if check is None:
            continue  # parameters of other passes are ignored
        problem = check(value)
        if problem:
            raise InvalidParam(f"{spec.id}: {name} {problem}")


def apply_pass(pass_id: str, program: Program, config: PassConfig | None = None) -> TransformResult:
    config = config or PassConfig()
    spec, variant = _split_id(pass_id, config)
    _check_params(spec, config)
    before = verify(program)
    if before:
        raise TransformError("input program does not verify: " + str(before[0]), "invalid_input")
    full_id = spec.id if variant is None else f"{spec.id}:{variant}"
    ctx = Context(spec, full_id, variant, config)
    work = program.clone()
    if spec.ast_level:
        if work.source is None:
            raise UnsupportedFeature("source", f"{spec.id} needs the MiniLang source of the program")
        out = spec.run(ctx, work)
        work, sites = out
    else:
        work.source = None
        sites = spec.run(ctx, work)
    if not sites:
        raise NoEligibleSites(f"{full_id}: no eligible sites")
    diags = verify(work)
    if diags:
        raise PassInvariantError(f"{full_id} produced invalid IR: " + "; ".join(map(str, diags[:3])))
    return TransformResult(work, list(sites), list(ctx.notes))


# -- levels and pipelines -------------------------------------------------------------------

LIGHT = ("extend_conditionals", "add_redundant_operands", "reorder_expressions")
NORMAL = LIGHT + ("dead_code_insertion", "irrelevant_code_insertion", "reorder_statements",
                  "instruction_substitution", "guard_to_trap")
AGGRESSIVE = NORMAL + ("control_flow_flattening", "goto_augmentation", "reducible_to_irreducible",
                       "basic_block_fission")
LEVELS = {"light": LIGHT, "normal": NORMAL, "aggressive": AGGRESSIVE}


def pipeline_order(ids: list[str]) -> list[str]:
    """Source-level passes first, then registry order, decompiler-resistance passes last."""
    order = {p: i for i, p in enumerate(pass_ids())}
    unique = list(dict.fromkeys(ids))

    def key(pid: str):
        spec = pass_spec(pid)
        group = 0 if spec.ast_level else (2 if spec.dr else 1)
        return (group, order[spec.id], pid)

    return sorted(unique, key=key)


@dataclass
class PipelineResult:
    program: Program
    applied: list[tuple[str, TransformResult]]
    skipped: list[tuple[str, str]]


def run_pipeline(program: Program, ids: list[str], config: PassConfig | None = None) -> PipelineResult:
    """Apply passes in pipeline order; passes with nothing to do are recorded as skipped."""
    config = config or PassConfig()
    current = program
    applied: list[tuple[str, TransformResult]] = []
    skipped: list[tuple[str, str]] = []
    for pid in pipeline_order(ids):
        try:
            res = apply_pass(pid, current, config)
        except (NoEligibleSites, UnsupportedFeature, UnsupportedTraps) as e:
            skipped.append((pid, e.code))
            continue
        applied.append((pid, res))
        current = res.program
    return PipelineResult(current, applied, skipped)
