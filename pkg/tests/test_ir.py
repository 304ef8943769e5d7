import random

import pytest

from cfo.ir import (
    Block, Function, INT, Instr, IRTextError, Program, def_use, dominators, emit_text,
    graph_is_reducible, immediate_dominators, is_reducible, natural_loops, parse_text, verify,
)
from oracles import path_dominators, random_cfg, t1t2_reducible

DIAMOND = {0: [1, 2], 1: [3], 2: [3], 3: []}


def _block(text: str) -> Block:
    fn = parse_text(text).functions[0]
    return fn.blocks[0]


def _one_fn(body: str) -> str:
    head = "program main\n\nfunc main(%0: arr) -> int {\n  regs %1: int, %2: int, %3: int\n  entry b0\n"
    return head + body + "}\n"


def test_def_use_read_after_write():
    text = _one_fn("block b0:\n  %1 = const 1\n  %2 = const 2\n  %3 = add %1, %2\n  ret %3\n")
    edges = def_use(_block(text))
    assert {(0, 2), (1, 2)} <= edges
    assert (0, 1) not in edges


def test_def_use_orders_effects():
    text = _one_fn("block b0:\n  %1 = const 1\n  %2 = const 2\n  print %1\n  print %2\n  ret %1\n")
    edges = def_use(_block(text))
    assert (2, 3) in edges


def test_def_use_midpoint_chain(binary_search):
    fn = binary_search.function("binarySearch")
    blk = next(b for b in fn.blocks if any(i.op == "div" for i in b.instrs))
    edges = def_use(blk)
    # every read of a register written earlier in the block depends on that write
    last_write = {}
    for j, ins in enumerate(blk.instrs):
        for r in ins.reads():
            if r in last_write:
                assert (last_write[r], j) in edges
        if ins.dst is not None:
            last_write[ins.dst] = j


def test_verify_clean_corpus(corpus):
    for program in corpus.values():
        assert verify(program) == []


def test_verify_dangling_target():
    text = _one_fn("block b0:\n  %1 = const 1\n  jmp b7\n")
    diags = verify(parse_text(text))
    assert len(diags) == 1 and "dangling target" in str(diags[0])


def test_verify_code_after_terminator():
    fn = Function("main", [0], INT, ["arr", INT], [
        Block(0, [Instr("const", 1, (1,)), Instr("ret", None, (1,)), Instr("const", 1, (2,))],
              Instr("ret", None, (1,)))])
    diags = verify(Program([fn]))
    assert len(diags) == 1 and "code after terminator" in str(diags[0])


def test_empty_body_function_text():
    fn = Function("f", [], "void", [], [Block(0, [], Instr("ret", None, ()))])
    main = Function("main", [0], INT, ["arr", INT],
                    [Block(0, [Instr("const", 1, (0,))], Instr("ret", None, (1,)))])
    text = emit_text(Program([fn, main]))
    assert "func f() -> void {" in text and "block b0:\n  ret\n" in text
    assert parse_text(text) == Program([fn, main])


def test_unknown_opcode_is_line_anchored():
    text = _one_fn("block b0:\n  %1 = frobnicate %2\n  ret %1\n")
    with pytest.raises(IRTextError) as e:
        parse_text(text)
    assert "frobnicate" in str(e.value)
    assert e.value.line == 7


def test_dominators_diamond():
    idom = immediate_dominators(DIAMOND, 0)
    assert idom[1] == idom[2] == idom[3] == 0


def test_dominators_single_block():
    fn = Function("main", [0], INT, ["arr", INT],
                  [Block(0, [Instr("const", 1, (0,))], Instr("ret", None, (1,)))])
    tree = dominators(fn)
    assert tree.dominates(0, 0)


def _check_against_paths(succ, entry):
    idom = immediate_dominators(succ, entry)
    oracle = path_dominators(succ, entry)
    for b, doms in oracle.items():
        chain = {b}
        x = b
        while x != entry:
            x = idom[x]
            chain.add(x)
        assert chain == doms, (succ, b)


def test_dominators_binary_search_match_path_oracle(binary_search):
    for fn in binary_search.functions:
        _check_against_paths(fn.successor_map(), fn.entry)


def test_dominators_random_graphs_match_path_oracle():
    rng = random.Random(11)
    for _ in range(300):
        _check_against_paths(random_cfg(rng, 12), 0)


def test_reducibility_textbook_cases():
    assert graph_is_reducible(DIAMOND, 0)
    assert not graph_is_reducible({0: [1, 2], 1: [2], 2: [1]}, 0)
    assert t1t2_reducible(DIAMOND, 0)
    assert not t1t2_reducible({0: [1, 2], 1: [2], 2: [1]}, 0)


def test_natural_loops_binary_search(binary_search):
    loops = natural_loops(binary_search.function("binarySearch"))
    assert len(loops) == 1
    assert is_reducible(binary_search.function("binarySearch"))


def test_clone_is_deep(binary_search):
    copy = binary_search.clone()
    copy.functions[0].blocks[0].instrs.clear()
    assert binary_search.functions[0].blocks[0].instrs
