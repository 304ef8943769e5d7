import random

import pytest

from cfo.frontend import compile_source, unparse
from cfo.harness import dead_code_coverage_check, differential_test, load_corpus, standard_inputs
from cfo.interpreter import run
from cfo.ir import NULL_ACCESS, def_use, emit_text, is_topological, verify
from cfo.metrics import is_reducible, single_dispatch_loop, unaligned_trap_entries
from cfo.opaque import ALWAYS_FALSE, ALWAYS_TRUE
from cfo.transforms import (
    Context, IneligibleSite, InterleaveError, InvalidParam, NoEligibleSites, PassConfig, RegionError,
    TransformError, UnsupportedFeature, apply_pass, insert_opaque_guard, is_known, pass_ids, pass_spec,
    pipeline_order, run_pipeline, variant_ids,
)
from cfo.transforms.loops import make_irreducible
from cfo.transforms.methods import inline_call, interleave_functions, outline_region
from cfo.transforms.virtualize import virtualize_function

ALL_IDS = pass_ids() + variant_ids()
SKIPS = (NoEligibleSites, UnsupportedFeature, TransformError)


def _equal(a, b, n=20, seed=0):
    v = differential_test(a, b, n, seed)
    assert v.equal, v.to_dict()


# -- engine ---------------------------------------------------------------------------------------

def test_registry_ids():
    assert len(pass_ids()) == 36
    assert "method_reordering" in pass_ids()
    assert len(variant_ids()) == 7
    assert is_known("dead_code_insertion:dead_switch") and not is_known("dead_code_insertion:nope")


def test_unknown_pass():
    with pytest.raises(KeyError):
        apply_pass("not_a_pass", load_corpus("if_simple"))


@pytest.mark.parametrize("value", [1, 17, "x"])
def test_unroll_factor_validated(binary_search, value):
    with pytest.raises(InvalidParam):
        apply_pass("loop_unrolling", binary_search, PassConfig(pass_params={"unroll_factor": value}))


def test_config_validation():
    with pytest.raises(InvalidParam):
        PassConfig(intensity="extreme")
    with pytest.raises(InvalidParam):
        PassConfig(site_fraction=0)


def test_ast_pass_needs_source(binary_search):
    lowered_only = binary_search.clone()
    lowered_only.source = None
    with pytest.raises(UnsupportedFeature):
        apply_pass("code_clone_iv", lowered_only)


def test_pipeline_order():
    order = pipeline_order(["reducible_to_irreducible", "code_clone_iv", "control_flow_flattening",
                            "extend_conditionals", "extend_conditionals"])
    assert order == ["code_clone_iv", "extend_conditionals", "control_flow_flattening",
                     "reducible_to_irreducible"]


def test_pipeline_skips_ineligible(corpus):
    res = run_pipeline(corpus["if_simple"], ["guard_to_trap", "extend_conditionals"])
    assert [p for p, _ in res.applied] == ["extend_conditionals"]
    assert res.skipped == [("guard_to_trap", "no_eligible_sites")]


@pytest.mark.parametrize("pid", ALL_IDS)
def test_pass_is_deterministic_and_preserving(corpus, pid):
    applied = 0
    for name in ("binary_search", "nested_try", "switch_case", "idioms", "straight_line", "many_methods"):
        program = corpus[name]
        try:
            a = apply_pass(pid, program, PassConfig(seed=3))
        except SKIPS:
            continue
        b = apply_pass(pid, program, PassConfig(seed=3))
        assert emit_text(a.program) == emit_text(b.program)
        assert a.sites == b.sites
        assert verify(a.program) == []
        _equal(program, a.program, 20, 3)
        applied += 1
    assert applied or pid in ("remove_library_idioms",)


def test_input_program_untouched(binary_search):
    before = emit_text(binary_search)
    for pid in ("control_flow_flattening", "table_interpretation", "reducible_to_irreducible"):
        apply_pass(pid, binary_search)
    assert emit_text(binary_search) == before


def test_site_fraction_limits_sites(binary_search):
    full = apply_pass("instruction_substitution", binary_search, PassConfig(seed=1))
    part = apply_pass("instruction_substitution", binary_search, PassConfig(seed=1, site_fraction=0.25))
    assert 0 < len(part.sites) < len(full.sites)


def test_intensity_scales_insertion(binary_search):
    light = apply_pass("dead_code_insertion", binary_search, PassConfig(seed=1, intensity="light"))
    heavy = apply_pass("dead_code_insertion", binary_search, PassConfig(seed=1, intensity="aggressive"))
    assert heavy.program.instruction_count() > light.program.instruction_count()


# -- opaque payloads --------------------------------------------------------------------------------

def test_dead_code_on_binary_search(binary_search):
    res = apply_pass("dead_code_insertion", binary_search, PassConfig(seed=1))
    assert res.program.instruction_count() > binary_search.instruction_count()
    _equal(binary_search, res.program, 100, 1)
    assert dead_code_coverage_check(res.program, standard_inputs(100, 1)).clean


def test_buggy_code_is_never_executed(binary_search):
    res = apply_pass("dead_code_insertion:buggy_code", binary_search, PassConfig(seed=2))
    assert dead_code_coverage_check(res.program, standard_inputs(50, 2)).clean


def _branch_block(fn):
    return next(b for b in fn.blocks if b.term.op == "br"
                and any(i.op == "load" for i in b.instrs) and any(i.op == "eq" for i in b.instrs))


def test_extend_conditional_false_predicate(binary_search):
    program = binary_search.clone()
    fn = program.function("binarySearch")
    blk = _branch_block(fn)
    cond = blk.term.args[0]
    insert_opaque_guard(fn, (blk.id, 0), ALWAYS_FALSE, "extend_conditional", seed=5)
    new = blk.term.args[0]
    defs = {i.dst: i for i in blk.instrs if i.dst is not None}
    conj = defs[new]
    assert conj.op == "and" and conj.args[0] == cond
    assert defs[conj.args[1]].op == "not"
    assert verify(program) == []
    _equal(binary_search, program)


def test_redundant_operand_on_return_value(binary_search):
    program = binary_search.clone()
    fn = program.function("binarySearch")
    blk = next(b for b in fn.blocks if b.term.op == "ret" and b.instrs and b.instrs[-1].op == "add")
    at = len(blk.instrs) - 1
    insert_opaque_guard(fn, (blk.id, at), ALWAYS_TRUE, "redundant_operand", seed=2)
    ops = [i.op for i in fn.block(blk.id).instrs]
    assert "mul" in ops[at:]
    _equal(binary_search, program)


def test_guard_errors(binary_search):
    fn = binary_search.clone().function("binarySearch")
    with pytest.raises(IneligibleSite):
        insert_opaque_guard(fn, (0, 0), ALWAYS_TRUE, "dead_block")
    with pytest.raises(IneligibleSite):
        insert_opaque_guard(fn, (999, 0), ALWAYS_FALSE, "dead_block")
    with pytest.raises(IneligibleSite):
        insert_opaque_guard(fn, (0, 0), ALWAYS_FALSE, "sideways")


# -- substitution family -----------------------------------------------------------------------------

def test_guard_to_trap_removes_null_test(corpus):
    program = corpus["idioms"]
    res = apply_pass("guard_to_trap", program)
    for site in res.sites:
        fname = site.split(":")[0]
        before = sum(i.op == "isnull" for _, _, i in program.function(fname).instructions())
        after = sum(i.op == "isnull" for _, _, i in res.program.function(fname).instructions())
        assert after < before
        assert any(NULL_ACCESS in t.kinds for t in res.program.function(fname).traps)
    _equal(program, res.program)


def test_remove_library_idioms_expands_min(corpus):
    program = corpus["idioms"]
    res = apply_pass("remove_library_idioms", program)
    before = sum(i.op == "min" for f in program.functions for _, _, i in f.instructions())
    after = sum(i.op == "min" for f in res.program.functions for _, _, i in f.instructions())
    assert after < before
    _equal(program, res.program)


def test_boolean_splitter_replaces_bools(binary_search):
    res = apply_pass("boolean_splitter", binary_search, PassConfig(seed=0))
    xors = sum(i.op == "xor" for f in res.program.functions for _, _, i in f.instructions())
    assert xors >= len(res.sites)
    _equal(binary_search, res.program)


def test_api_wrappers(binary_search):
    res = apply_pass("api_buffer_methods", binary_search)
    wrappers = [f for f in res.program.functions if f.name.startswith("api_")]
    assert {f.name for f in wrappers} == {"api_len", "api_print"}
    for w in wrappers:
        assert len(w.blocks) == 1 and len(w.blocks[0].instrs) == 1
    for f in res.program.functions:
        if f not in wrappers:
            assert not any(i.op in ("len", "print") for _, _, i in f.instructions())
    _equal(binary_search, res.program)


# -- ordering family --------------------------------------------------------------------------------

def test_reorder_statements_respects_dependences(corpus):
    for name in ("straight_line", "binary_search", "matrix"):
        program = corpus[name]
        for seed in range(5):
            res = apply_pass("reorder_statements", program, PassConfig(seed=seed))
            for f in program.functions:
                g = res.program.function(f.name)
                for b in f.blocks:
                    keys = [(i.op, i.dst, i.args) for i in b.instrs]
                    if len(set(keys)) != len(keys):
                        continue
                    new = [(i.op, i.dst, i.args) for i in g.block(b.id).instrs]
                    assert sorted(new) == sorted(keys)
                    order = [keys.index(k) for k in new]
                    assert is_topological(order, def_use(b))


def test_method_reordering_permutes(corpus):
    program = corpus["binary_search"]
    orders = {tuple(f.name for f in apply_pass("method_reordering", program, PassConfig(seed=s))
                    .program.functions) for s in range(30)}
    assert len(orders) > 1


def test_duplicate_sequence_reuse_shrinks(corpus):
    program = corpus["straight_line"]
    res = apply_pass("duplicate_sequence_reuse", program)
    assert res.program.instruction_count() <= program.instruction_count()
    assert any(b.term.op == "switch" for b in res.program.function("main").blocks)
    _equal(program, res.program)


def test_hoist_moves_common_prefix(corpus):
    program = corpus["if_else"]
    res = apply_pass("hoist_common_branch_code", program)
    assert res.program.instruction_count() < program.instruction_count()
    _equal(program, res.program)


# -- source-level passes ------------------------------------------------------------------------------

@pytest.mark.parametrize("pid", ["code_clone_iv", "replace_equivalent_codes"])
def test_source_passes_change_source(corpus, pid):
    for name in ("binary_search", "loops_for", "loops_while"):
        program = corpus[name]
        res = apply_pass(pid, program, PassConfig(seed=1))
        assert res.program.source is not None
        assert unparse(res.program.source) != unparse(program.source)
        assert compile_source(unparse(res.program.source)) is not None
        _equal(program, res.program)


def test_code_clone_swaps_loop_forms(binary_search):
    res = apply_pass("code_clone_iv", binary_search)
    text = unparse(res.program.source)
    assert text.count("for (") != unparse(binary_search.source).count("for (")


# -- loops -----------------------------------------------------------------------------------------

def test_unroll_by_three_replicates_print(binary_search):
    cfg = PassConfig(seed=0, pass_params={"unroll_factor": 3})
    res = apply_pass("loop_unrolling", binary_search, cfg)
    prints = sum(i.op == "print" for _, _, i in res.program.function("main").instructions())
    assert prints == 3
    _equal(binary_search, res.program, 50)


@pytest.mark.parametrize("pid, params", [("loop_fission", {"split_after": 2}),
                                         ("loop_blocking", {"block_size": 2}),
                                         ("insert_dummy_loop", {})])
def test_loop_passes_preserve(corpus, pid, params):
    for name in ("matrix", "bubble_sort", "loops_for", "primes"):
        program = corpus[name]
        res = apply_pass(pid, program, PassConfig(seed=1, pass_params=params))
        assert is_reducible(res.program)
        _equal(program, res.program)


def test_make_irreducible_straight_line():
    program = compile_source("fn main(args: int[]) -> int { print(1); print(2); return 3; }")
    work = program.clone()
    fn = work.function("main")
    ctx = Context(pass_spec("reducible_to_irreducible"), "reducible_to_irreducible", None, PassConfig())
    make_irreducible(fn, ctx)
    assert verify(work) == [] and not is_reducible(fn)
    _equal(program, work)


def test_make_irreducible_existing_loop(corpus):
    program = corpus["loops_while"]
    work = program.clone()
    fn = work.function("main")
    loops_before = len([b for b in fn.blocks])
    ctx = Context(pass_spec("reducible_to_irreducible"), "reducible_to_irreducible", None, PassConfig(seed=2))
    make_irreducible(fn, ctx, second_cycle=True)
    assert len(fn.blocks) > loops_before
    assert not is_reducible(fn)
    _equal(program, work)


# -- methods -------------------------------------------------------------------------------------------

def test_outline_straight_line_region():
    program = compile_source("""
        fn main(args: int[]) -> int {
            int a = 2; int b = 5;
            int c = a * b; int d = c + a; int e = d - b;
            print(e); return e;
        }""")
    work = program.clone()
    fn = work.function("main")
    blk = fn.blocks[0]
    muls = [k for k, i in enumerate(blk.instrs) if i.op == "mul"]
    start = muls[0]
    new = outline_region(work, fn, blk.id, (start, start + 3))
    assert new.instruction_count() == 4
    call = next(i for i in fn.blocks[0].instrs if i.op == "call")
    assert len(call.args[1]) == len(new.params) == 2
    _equal(program, work)
    inline_call(work, fn, fn.blocks[0].id, fn.blocks[0].instrs.index(call))
    assert verify(work) == []
    _equal(program, work)


def test_outline_rejects_terminator_and_empty(binary_search):
    work = binary_search.clone()
    fn = work.function("binarySearch")
    blk = next(b for b in fn.blocks if b.term.op == "br" and b.instrs)
    with pytest.raises(RegionError) as e:
        outline_region(work, fn, blk.id, (0, len(blk.instrs) + 1))
    assert e.value.code == "region_contains_terminator"
    with pytest.raises(RegionError) as e:
        outline_region(work, fn, blk.id, (1, 1))
    assert e.value.code == "empty_region"


def test_interleave_identity_functions():
    program = compile_source("""
        fn f(x: int) -> int { return x; }
        fn g(y: int) -> int { return y; }
        fn main(args: int[]) -> int { print(f(1)); print(g(2)); return 0; }""")
    work = program.clone()
    merged = interleave_functions(work, "f", "g")
    assert [f.name for f in work.functions] == [merged.name, "main"]
    calls = [i for _, _, i in work.function("main").instructions() if i.op == "call"]
    assert len(calls) == 2 and all(c.args[0] == merged.name for c in calls)
    _equal(program, work)


def test_interleave_errors(binary_search):
    with pytest.raises(InterleaveError) as e:
        interleave_functions(binary_search.clone(), "binarySearch", "binarySearch")
    assert e.value.code == "self_interleave"
    with pytest.raises(InterleaveError) as e:
        interleave_functions(binary_search.clone(), "binarySearch", "printResult")
    assert e.value.code == "signature_mismatch"


def test_clone_method_adds_functions(binary_search):
    res = apply_pass("clone_method", binary_search)
    assert len(res.program.functions) > len(binary_search.functions)
    _equal(binary_search, res.program)


# -- virtualization ------------------------------------------------------------------------------------

ADD = "fn add(a: int, b: int) -> int { return a + b; } fn main(args: int[]) -> int { return 0; }"


def test_virtualized_add_on_random_pairs():
    program = compile_source(ADD)
    fn = program.function("add")
    virtualize_function(fn, seed=1)
    assert verify(program) == []
    assert single_dispatch_loop(fn)
    code = next(i for _, _, i in fn.instructions() if i.op == "arrlit")
    assert len(code.args[0]) >= 3
    rng = random.Random(0)
    driver = compile_source(ADD.replace("return 0;", "print(add(args[0], args[1])); return 0;"))
    virt = driver.clone()
    virtualize_function(virt.function("add"), seed=1)
    pairs = [[rng.randint(-(1 << 63), (1 << 63) - 1) for _ in range(2)] for _ in range(1000)]
    assert differential_test(driver, virt, inputs=pairs).equal


def test_virtualize_refuses_calls(binary_search):
    with pytest.raises(UnsupportedFeature) as e:
        virtualize_function(binary_search.clone().function("main"))
    assert e.value.feature == "calls"


def test_virtualized_loop_step_inflation(corpus):
    program = corpus["loops_while"]
    res = apply_pass("table_interpretation", program)
    for x in standard_inputs(10):
        a, b = run(program, x), run(res.program, x)
        assert a.observable() == b.observable()
        assert b.steps <= 30 * a.steps


# -- traps ------------------------------------------------------------------------------------------------

def test_partially_trapping_switch(corpus):
    program = corpus["switch_case"]
    res = apply_pass("partially_trapping_switch", program)
    assert sum(len(unaligned_trap_entries(f)) for f in res.program.functions) > 0
    assert dead_code_coverage_check(res.program, standard_inputs(20)).clean
    _equal(program, res.program)


def test_combine_try_catch(corpus):
    program = corpus["nested_try"]
    res = apply_pass("combine_try_catch", program)
    before = sum(len(f.traps) for f in program.functions)
    after = sum(len(f.traps) for f in res.program.functions)
    assert after <= before
    assert is_reducible(res.program) == is_reducible(program)
    _equal(program, res.program)


def test_indirect_if_keeps_handler_dead(corpus):
    program = corpus["binary_search"]
    res = apply_pass("indirect_if", program)
    assert not is_reducible(res.program)
    assert dead_code_coverage_check(res.program, standard_inputs(30)).clean
    _equal(program, res.program)
