import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfo.interpreter import run
from cfo.ir import BOOL, INT, Block, Function, Instr, Program
from cfo.opaque import (
    ALWAYS_FALSE, ALWAYS_TRUE, CONTEXTUAL, FAMILIES, REJECTED, DomainTooLarge, evaluate, family,
    gen_opaque_value, gen_predicate, materialize, predicate_table, spot_check, verify_predicate_exhaustive,
)

I64 = st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1)


def test_family_counts():
    assert sum(f.truth == ALWAYS_TRUE for f in FAMILIES) >= 4
    assert sum(f.truth == ALWAYS_FALSE for f in FAMILIES) >= 2


def test_parity_template():
    p = gen_predicate(ALWAYS_TRUE, 0, family_name="parity")
    assert str(p) in ("(((v * (v + 1)) % 2) == 0)", "(((v * (1 + v)) % 2) == 0)",
                      "((((v + 1) * v) % 2) == 0)", "((((1 + v) * v) % 2) == 0)")


def test_remainder_template():
    assert str(gen_predicate(ALWAYS_FALSE, 0, family_name="remainder")) == "((v % 2) == 2)"


def test_square_template():
    assert str(gen_predicate(ALWAYS_TRUE, 0, family_name="square_mod4")) == "(((v * v) % 4) <= 1)"


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_family_exhaustive_16_bit(fam):
    for seed in range(4):
        tmpl = fam.build(random.Random(seed))
        verdict = verify_predicate_exhaustive(tmpl, 16, fam.truth)
        assert verdict.holds, verdict.counterexample
        assert verdict.evaluations == 1 << 16
        assert spot_check(tmpl, fam.truth).holds


def test_rejected_family_passes_16_bits_but_fails_spot_check():
    (bad,) = REJECTED
    tmpl = bad.build(random.Random(0))
    assert verify_predicate_exhaustive(tmpl, 16, bad.truth).holds
    verdict = spot_check(tmpl, bad.truth)
    assert not verdict.holds
    assert verdict.counterexample == ((1 << 32) - 1,)


def test_domain_limit():
    tmpl = FAMILIES[0].build(random.Random(0))
    with pytest.raises(DomainTooLarge):
        verify_predicate_exhaustive(tmpl, 21, ALWAYS_TRUE)


def test_contextual_cannot_be_verified():
    p = gen_predicate(CONTEXTUAL, 0)
    with pytest.raises(ValueError):
        verify_predicate_exhaustive(p, 8)


def test_seed_determinism():
    for truth in (ALWAYS_TRUE, ALWAYS_FALSE, CONTEXTUAL):
        for seed in range(20):
            assert gen_predicate(truth, seed, (3, 5)) == gen_predicate(truth, seed, (3, 5))


def test_no_calls_or_memory():
    ops = set()

    def walk(t):
        ops.add(t.op)
        for a in t.args or ():
            walk(a)

    for f in FAMILIES:
        walk(f.build(random.Random(1)))
    assert not ops & {"call", "load", "store", "div"}


def test_predicate_table_points_at_proofs():
    from pathlib import Path
    doc = (Path(__file__).parent.parent / "docs" / "predicates.md").read_text()
    for row in predicate_table():
        anchor = row["proof"].split("#")[1]
        assert f"## {anchor}" in doc


@settings(max_examples=300, deadline=None)
@given(I64, st.sampled_from(FAMILIES), st.integers(0, 50))
def test_families_hold_on_64_bit_values(v, fam, seed):
    want = 1 if fam.truth == ALWAYS_TRUE else 0
    assert evaluate(fam.build(random.Random(seed)), [v, v]) == want


@settings(max_examples=200, deadline=None)
@given(I64, st.sampled_from([0, 1]), st.integers(0, 50))
def test_opaque_values(v, value, seed):
    assert evaluate(gen_opaque_value(value, seed).expression, [v]) == value


@settings(max_examples=60, deadline=None)
@given(I64, st.sampled_from(FAMILIES), st.integers(0, 20))
def test_materialized_predicate_matches_evaluator(v, fam, seed):
    """Lowered into IR and run by the interpreter, the template agrees with ``evaluate``."""
    tmpl = fam.build(random.Random(seed))
    fn = Function("main", [0], INT, ["arr", INT], [])
    instrs, res = materialize(tmpl, fn, [1])
    out = fn.new_reg(INT)
    body = [Instr("const", 1, (v,))] + instrs
    if fn.reg_types[res] == BOOL:
        one, zero = fn.new_reg(INT), fn.new_reg(INT)
        fn.blocks = [Block(0, body, Instr("br", None, (res, 1, 2))),
                     Block(1, [Instr("const", one, (1,))], Instr("ret", None, (one,))),
                     Block(2, [Instr("const", zero, (0,))], Instr("ret", None, (zero,)))]
    else:
        fn.blocks = [Block(0, body + [Instr("move", out, (res,))], Instr("ret", None, (out,)))]
    r = run(Program([fn]), [])
    assert r.outcome.value == evaluate(tmpl, [v])


def test_family_lookup():
    assert family("parity").truth == ALWAYS_TRUE
    with pytest.raises(KeyError):
        family("nope")
