import copy

import pytest

from cfo.frontend import ast as A
from cfo.frontend import compile_source, parse, unparse
from cfo.harness import (
    EDGE_INPUTS, EQUAL, FEATURES, MISMATCH, ORIGINAL_FUEL_EXHAUSTED, GenConfig, corpus_names,
    corpus_source, dead_code_coverage_check, dead_sites, differential_test, features_used,
    gen_program, load_all, standard_inputs,
)
from cfo.interpreter import run
from cfo.ir import verify
from cfo.transforms import PassConfig, apply_pass

LOOPS = (A.While, A.For)


def _nodes(unit, kind):
    return [n for fn in unit.functions for n in fn.body.walk() if isinstance(n, kind)]


# -- differential testing ---------------------------------------------------------------------

def test_identity_is_equal(corpus):
    for name, prog in corpus.items():
        v = differential_test(prog, prog, 20, 0)
        assert v.status == EQUAL, name
        assert v.inputs_compared + v.skipped == 20


def test_planted_bug_reports_first_divergence():
    good = compile_source(corpus_source("if_simple"))
    bad = compile_source(corpus_source("if_simple").replace("score * 2", "score * 3"))
    v = differential_test(good, bad, 20, 0)
    assert v.status == MISMATCH
    d = v.first_divergence
    assert d is not None and d.original != d.transformed
    assert v.to_dict()["first_divergence"]["input"] == d.input


def test_divergence_on_outcome_only():
    a = compile_source("fn main(args: int[]) -> int { return 1; }")
    b = compile_source("fn main(args: int[]) -> int { return 2; }")
    v = differential_test(a, b, 4, 0)
    assert v.status == MISMATCH
    assert v.first_divergence.position == 0
    assert v.first_divergence.input is None


def test_standard_inputs():
    xs = standard_inputs(20, 3)
    assert len(xs) == 20
    assert tuple(xs[:len(EDGE_INPUTS)]) == EDGE_INPUTS
    assert standard_inputs(20, 3) == xs
    assert standard_inputs(20, 4) != xs
    assert all(x is None or all(-(1 << 63) <= v < (1 << 63) for v in x) for x in xs)


def test_original_fuel_exhausted():
    spin = compile_source("fn main(args: int[]) -> int { while (true) { } return 0; }")
    v = differential_test(spin, spin, 5, 0, fuel=1000)
    assert v.status == ORIGINAL_FUEL_EXHAUSTED
    assert v.skipped == 5 and v.inputs_compared == 0


def test_transformed_gets_more_fuel(binary_search):
    vm = apply_pass("table_interpretation", binary_search, PassConfig(seed=1)).program
    xs = standard_inputs(20, 0)
    need = max(run(binary_search, x).steps for x in xs)
    assert max(run(vm, x).steps for x in xs) > need
    # fuel that only just fits the original still lets the inflated program finish
    v = differential_test(binary_search, vm, fuel=need, inputs=xs)
    assert v.status == EQUAL and v.skipped == 0


# -- dead-code coverage -----------------------------------------------------------------------

def test_inserted_dead_code_never_runs(corpus):
    for name, prog in corpus.items():
        res = apply_pass("dead_code_insertion", prog, PassConfig(seed=2, intensity="aggressive"))
        assert dead_sites(res.program), name
        assert dead_code_coverage_check(res.program, standard_inputs(20, 0)).clean, name


def test_planted_dead_execution_detected(binary_search):
    prog = copy.deepcopy(binary_search)
    entry = prog.functions[0].block(prog.functions[0].entry)
    entry.instrs[0] = entry.instrs[0].with_tag("dead")
    report = dead_code_coverage_check(prog, standard_inputs(5, 0))
    assert not report.clean
    assert report.executed == [(prog.functions[0].name, entry.id, 0)]
    assert report.dead_instructions == 1


# -- corpus -----------------------------------------------------------------------------------

def test_corpus_loads_and_verifies():
    progs = load_all()
    assert len(progs) == 16 == len(corpus_names())
    for name, prog in progs.items():
        assert verify(prog) == [], name
        assert prog.function("main") is not None


# -- generator --------------------------------------------------------------------------------

def test_if_only_mask():
    for seed in range(10):
        unit = gen_program(GenConfig(seed=seed, feature_mask={"if"}))
        assert _nodes(unit, A.If)
        assert not _nodes(unit, LOOPS)
        assert all(n.orelse is None for n in _nodes(unit, A.If))
        assert len(unit.functions) == 1


def test_nested_mask_depth():
    mask = {"while", "try_catch", "nested_conditionals"}
    for seed in range(15):
        unit = gen_program(GenConfig(seed=seed, feature_mask=mask))
        depths = [A.max_nesting(f.body) for f in unit.functions]
        assert 2 <= max(depths) <= 3
        assert not _nodes(unit, (A.If, A.For, A.Switch))
        assert _nodes(unit, A.While) and _nodes(unit, A.Try)


@pytest.mark.parametrize("seed", range(6))
def test_full_mask_features_match(seed):
    cfg = GenConfig(seed=seed)
    unit = gen_program(cfg)
    assert features_used(unit) == set(FEATURES)
    prog = compile_source(unparse(unit))
    assert verify(prog) == []
    assert all(len(f.blocks) <= cfg.max_blocks_per_function for f in prog.functions)


def test_block_limit_enforced():
    cfg = GenConfig(seed=5, max_blocks_per_function=24, feature_mask={"if", "while", "arrays"})
    prog = compile_source(unparse(gen_program(cfg)))
    assert max(len(f.blocks) for f in prog.functions) <= 24


def test_generator_deterministic():
    cfg = GenConfig(seed=42)
    assert unparse(gen_program(cfg)) == unparse(gen_program(cfg))
    assert unparse(gen_program(GenConfig(seed=43))) != unparse(gen_program(cfg))


def test_generated_text_reparses():
    unit = gen_program(GenConfig(seed=9))
    assert unparse(parse(unparse(unit))) == unparse(unit)


@pytest.mark.parametrize("kwargs", [
    {"feature_mask": {"loops"}},
    {"max_loop_depth": 4},
    {"max_functions": 0},
    {"feature_mask": {"multi_function"}, "max_functions": 1},
    {"feature_mask": {"nested_conditionals"}},
    {"feature_mask": {"if", "nested_conditionals"}, "max_loop_depth": 1},
])
def test_bad_configs(kwargs):
    with pytest.raises(ValueError):
        GenConfig(**kwargs)
