from collections import Counter

import pytest

from cfo.frontend import compile_source
from cfo.harness import differential_test, standard_inputs
from cfo.interpreter import run, run_traced
from cfo.ir import parse_text, verify
from cfo.metrics import is_reducible, single_dispatch_loop
from cfo.transforms import PassConfig, UnsupportedTraps, apply_pass
from cfo.transforms.flatten import dispatcher_shape, flatten_function

TWO_BLOCKS = """program main

func main(%0: arr) -> int {
  regs %1: int, %2: int
  entry b0
block b0:
  %1 = const 1
  print %1
  jmp b1
block b1:
  %2 = const 2
  print %2
  ret %2
}
"""


def _key(ins):
    return (ins.op, ins.dst, ins.args)


def check_flattened(original, flat):
    """Structural postconditions of one flattened function."""
    shape = dispatcher_shape(flat)
    assert shape is not None
    head, initial, cases = shape
    d = flat.block(head).term.args[0]
    case_blocks = set(cases.values())
    # every original instruction except catches and branches (which become
    # state updates) sits in exactly one case
    before = Counter(_key(i) for _, _, i in original.instructions()
                     if i.op not in ("catch", "jmp", "br", "switch"))
    inside = Counter(_key(i) for b in flat.blocks if b.id in case_blocks
                     for i in b.instrs + [b.term] if i.tag != "dispatcher")
    assert inside == before
    for b in flat.blocks:
        if b.id in case_blocks:
            writes = sum(1 for i in b.instrs if i.dst == d)
            assert writes == (1 if b.term.op == "jmp" else 0)
            if b.term.op == "jmp":
                assert b.term.args == (head,)
    # catches stay in their handler stubs
    for h in flat.handlers():
        blk = flat.block(h)
        assert blk.instrs[0].op == "catch" and h not in case_blocks
    return shape


def test_two_block_example_structure():
    program = parse_text(TWO_BLOCKS)
    original = program.clone().function("main")
    fn = program.function("main")
    first = fn.entry
    flatten_function(fn, seed=0)
    assert verify(program) == []
    head, initial, cases = check_flattened(original, fn)
    assert cases[initial] == first
    assert len(cases) == 2


def test_two_block_example_trace():
    program = parse_text(TWO_BLOCKS)
    for seed in range(10):
        work = program.clone()
        fn = work.function("main")
        flatten_function(fn, seed)
        head, initial, cases = dispatcher_shape(fn)
        result, trace = run_traced(work, [])
        assert result.output == ["1", "2"]
        blocks = [b for _, b in trace]
        assert blocks[:3] == [fn.entry, head, cases[initial]]
        assert cases[initial] == 0


def test_single_block_still_wrapped():
    program = compile_source("fn main(args: int[]) -> int { print(5); return 1; }")
    fn = program.function("main")
    flatten_function(fn, 3)
    head, initial, cases = dispatcher_shape(fn)
    assert len(cases) == 1
    assert run(program, []).output == ["5"]


def test_binary_search_flattened(binary_search):
    flat = apply_pass("control_flow_flattening", binary_search, PassConfig(seed=4)).program
    for f in binary_search.functions:
        check_flattened(f, flat.function(f.name))
    assert is_reducible(flat)
    assert all(single_dispatch_loop(f) for f in flat.functions)
    import random
    rng = random.Random(1)
    arrays = [sorted(rng.randint(-20, 20) for _ in range(rng.randint(0, 12))) for _ in range(100)]
    assert differential_test(binary_search, flat, inputs=arrays).equal


def test_flattening_with_aligned_handlers(corpus):
    program = corpus["nested_try"]
    flat = apply_pass("control_flow_flattening", program, PassConfig(seed=1)).program
    for f in program.functions:
        check_flattened(f, flat.function(f.name))
    assert differential_test(program, flat, 20).equal


def test_unaligned_traps_refused():
    text = """program main

func main(%0: arr) -> int {
  regs %1: int, %2: int
  entry b0
block b0:
  %1 = const 1
  %2 = len %0
  ret %2
block b1:
  %2 = catch
  ret %2
  trap b0 1 3 -> b1 [NullAccess]
}
"""
    program = parse_text(text)
    with pytest.raises(UnsupportedTraps):
        flatten_function(program.function("main"))
    with pytest.raises(UnsupportedTraps):
        apply_pass("control_flow_flattening", program)


def test_seeded_keys_vary(binary_search):
    keys = set()
    for seed in range(8):
        flat = apply_pass("control_flow_flattening", binary_search, PassConfig(seed=seed)).program
        keys.add(tuple(sorted(dispatcher_shape(flat.function("binarySearch"))[2].items())))
    assert len(keys) > 1


@pytest.mark.parametrize("seed", range(3))
def test_corpus_flattening_equal(corpus, seed):
    for name, program in corpus.items():
        try:
            flat = apply_pass("control_flow_flattening", program, PassConfig(seed=seed)).program
        except UnsupportedTraps:
            continue
        assert differential_test(program, flat, 20, seed).equal, name
        assert is_reducible(flat), name
        assert standard_inputs(20, seed)
