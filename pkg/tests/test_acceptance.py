"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""
import json
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from itertools import permutations
from pathlib import Path

import pytest

from cfo import catalog
from cfo.frontend import compile_source, unparse
from cfo.harness import (
    GenConfig, corpus_dir, dead_code_coverage_check, dead_sites, differential_test, gen_program,
    standard_inputs,
)
from cfo.interpreter import run, run_traced
from cfo.ir import graph_is_reducible, parse_text, verify
from cfo.metrics import compute_metrics, is_reducible, single_dispatch_loop, unaligned_trap_entries
from cfo.opaque import FAMILIES, verify_predicate_exhaustive
from cfo.transforms import (
    NoEligibleSites, PassConfig, TransformError, apply_pass, pass_ids, pass_spec, variant_ids,
)
from cfo.transforms.flatten import dispatcher_shape, flatten_function
from oracles import random_cfg, t1t2_reducible
from test_flatten import TWO_BLOCKS, check_flattened

ALL_CONFIGS = pass_ids() + variant_ids()
SKIPS = (NoEligibleSites, TransformError)
TABLE = Path(__file__).parent / "data" / "technique_table.tsv"


@contextmanager
def criterion(capsys, number: int, title: str):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        took = time.perf_counter() - start
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} ({took:.1f}s)")


def _try(pid, program, config=None):
    try:
        return apply_pass(pid, program, config or PassConfig())
    except SKIPS:
        return None


def _site_functions(result) -> set[str]:
    return {s.split(":")[0] for s in result.sites}


# 1 -------------------------------------------------------------------------------------------

def test_catalog_fidelity(capsys):
    with criterion(capsys, 1, "catalog has 43 rows, 5 levels, 7 tools-only, 36 literature"):
        start = time.perf_counter()
        rows = json.loads(catalog.emit_table("json"))["rows"]
        elapsed = time.perf_counter() - start
        assert len(rows) == 43
        assert len({r["level"] for r in rows}) == 5
        assert sum(r["in_tools"] and not r["in_literature"] for r in rows) == 7
        assert sum(r["in_literature"] for r in rows) == 36
        yn = "NY"
        expected = [line.split("\t") for line in TABLE.read_text().splitlines()
                    if not line.startswith("#")]
        got = [[r["name"], r["level"], yn[r["in_literature"]], yn[r["in_tools"]], yn[r["dr"]],
                r["paradigm"]] for r in rows]
        assert got == expected
        assert elapsed < 1.0


# 2 -------------------------------------------------------------------------------------------

@pytest.mark.slow
def test_semantic_preservation_sweep(capsys, corpus):
    with criterion(capsys, 2, f"{len(ALL_CONFIGS)} pass configs x 116 programs x 20 inputs all equal"):
        start = time.perf_counter()
        generated = {f"gen{s}": compile_source(unparse(gen_program(GenConfig(seed=s))), f"gen{s}")
                     for s in range(100)}
        programs = {**corpus, **generated}
        assert len(programs) == 116
        mismatches, applied = [], {pid: 0 for pid in ALL_CONFIGS}
        for pid in ALL_CONFIGS:
            for k, (name, prog) in enumerate(programs.items()):
                res = _try(pid, prog, PassConfig(seed=k))
                if res is None:
                    continue
                applied[pid] += 1
                v = differential_test(prog, res.program, 20, k)
                if v.status == "mismatch":
                    mismatches.append((pid, name, v.to_dict()))
        assert mismatches == []
        assert all(applied.values()), [p for p, n in applied.items() if not n]
        assert time.perf_counter() - start < 600


# 3 -------------------------------------------------------------------------------------------

def test_opaque_soundness(capsys):
    with criterion(capsys, 3, "every predicate family holds over all 16-bit inputs"):
        start = time.perf_counter()
        for fam in FAMILIES:
            for seed in range(4):
                verdict = verify_predicate_exhaustive(fam.build(random.Random(seed)), 16, fam.truth)
                assert verdict.holds, (fam.name, verdict.counterexample)
                assert verdict.evaluations == 1 << 16
        assert time.perf_counter() - start < 30


# 4 -------------------------------------------------------------------------------------------

def test_dead_code_never_executes(capsys, corpus):
    with criterion(capsys, 4, "dead-tagged instructions have zero coverage"):
        inputs = standard_inputs(40, 1)
        checked = 0
        for pid in ALL_CONFIGS:
            for name, prog in corpus.items():
                for seed in range(2):
                    res = _try(pid, prog, PassConfig(seed=seed, intensity="aggressive"))
                    if res is None or not dead_sites(res.program):
                        continue
                    checked += 1
                    report = dead_code_coverage_check(res.program, inputs)
                    assert report.clean, (pid, name, report.executed)
        assert checked > 0


# 5 -------------------------------------------------------------------------------------------

IRREDUCIBLE = ("goto_augmentation", "reducible_to_irreducible", "intersecting_loops",
               "basic_block_fission", "indirect_if")


def test_dr_proxies(capsys, corpus):
    with criterion(capsys, 5, "DR passes trigger their proxies; DR=N passes keep reducibility; "
                              "dominator detector agrees with T1/T2"):
        dr_ids = [p for p in pass_ids() if pass_spec(p).dr]
        assert sorted(dr_ids) == sorted(IRREDUCIBLE + ("partially_trapping_switch", "table_interpretation"))
        for pid in dr_ids:
            hits = 0
            for name, prog in corpus.items():
                res = _try(pid, prog)
                if res is None:
                    continue
                for fname in _site_functions(res):
                    fn = res.program.function(fname)
                    if pid in IRREDUCIBLE:
                        assert not is_reducible(fn), (pid, name, fname)
                    elif pid == "partially_trapping_switch":
                        assert unaligned_trap_entries(fn), (pid, name, fname)
                    else:
                        assert single_dispatch_loop(fn), (pid, name, fname)
                    hits += 1
            assert hits > 0, pid
        for pid in ALL_CONFIGS:
            if pass_spec(pid).dr:
                continue
            for name, prog in corpus.items():
                res = _try(pid, prog)
                if res is not None:
                    assert is_reducible(res.program) == is_reducible(prog), (pid, name)
        rng = random.Random(2024)
        irreducible = 0
        for _ in range(1000):
            succ = random_cfg(rng, 15)
            verdict = graph_is_reducible(succ, 0)
            assert verdict == t1t2_reducible(succ, 0), succ
            irreducible += not verdict
        assert irreducible > 0


# 6 -------------------------------------------------------------------------------------------

def test_method_reordering_variants(capsys, binary_search):
    with criterion(capsys, 6, "method_reordering over 3 functions x 200 seeds gives all 6 orders"):
        names = [f.name for f in binary_search.functions]
        assert len(names) == 3
        orders = set()
        for seed in range(200):
            res = apply_pass("method_reordering", binary_search, PassConfig(seed=seed))
            orders.add(tuple(f.name for f in res.program.functions))
        assert orders == set(permutations(names))


# 7 -------------------------------------------------------------------------------------------

def test_potency(capsys, corpus):
    with criterion(capsys, 7, "insertion grows code; flattening keeps instructions and stays "
                              "reducible; virtualization inflation <= 30"):
        insertion = [p for p in ALL_CONFIGS if pass_spec(p).insertion]
        assert insertion
        for pid in insertion:
            for name, prog in corpus.items():
                res = _try(pid, prog)
                if res is not None:
                    before = compute_metrics(prog).instructions
                    assert compute_metrics(res.program).instructions > before, (pid, name)
        flattened = 0
        for name, prog in corpus.items():
            res = _try("control_flow_flattening", prog)
            if res is None:
                continue
            for fn in prog.functions:
                check_flattened(fn, res.program.function(fn.name))
            assert is_reducible(res.program), name
            flattened += 1
        assert flattened >= 12
        worst = 0.0
        for name, prog in corpus.items():
            res = _try("table_interpretation", prog)
            if res is None:
                continue
            for x in standard_inputs(20):
                a, b = run(prog, x), run(res.program, x)
                assert a.observable() == b.observable(), (name, x)
                worst = max(worst, b.steps / a.steps)
        assert 1.0 < worst <= 30, worst


# 8 -------------------------------------------------------------------------------------------

def test_two_block_flattening(capsys):
    with criterion(capsys, 8, "initial dispatcher value selects the case of the first block"):
        for seed in range(20):
            program = parse_text(TWO_BLOCKS)
            original = program.clone().function("main")
            fn = program.function("main")
            first = fn.entry
            flatten_function(fn, seed)
            assert verify(program) == []
            head, initial, cases = check_flattened(original, fn)
            assert len(cases) == 2 and cases[initial] == first
            result, trace = run_traced(program, [])
            assert result.output == ["1", "2"]
            assert [b for _, b in trace][:3] == [fn.entry, head, cases[initial]]
            assert dispatcher_shape(fn) == (head, initial, cases)


# 9 -------------------------------------------------------------------------------------------

def test_end_to_end_cli(capsys, tmp_path):
    with criterion(capsys, 9, "obfuscate binary_search at aggressive seed 7 is equal and reproducible"):
        source = str(corpus_dir() / "binary_search.mini")

        def once(tag):
            out, rep = tmp_path / f"{tag}.ir", tmp_path / f"{tag}.json"
            proc = subprocess.run(
                [sys.executable, "-m", "cfo", "obfuscate", source, "--level", "aggressive",
                 "--seed", "7", "--report", str(rep), "-o", str(out)],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            return out.read_bytes(), rep.read_bytes()

        first, second = once("a"), once("b")
        assert first == second
        report = json.loads(first[1])
        assert report["diff"]["status"] == "equal"
        assert report["passes"]
