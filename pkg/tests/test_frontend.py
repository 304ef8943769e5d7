import pytest

from cfo.frontend import FrontendError, check_unit, compile_source, lower, parse, parse_syntax, unparse
from cfo.frontend import ast as A
from cfo.harness import corpus_names, corpus_source
from cfo.ir import emit_text, parse_text, verify


def test_multi_declaration_splits():
    unit = parse("fn main(args: int[]) -> int { int l = 0, r = len(args) - 1; return r; }")
    stmts = unit.functions[0].body.stmts
    assert [type(s) for s in stmts] == [A.VarDecl, A.VarDecl, A.Return]
    assert [s.name for s in stmts[:2]] == ["l", "r"]


def test_identity_function():
    unit = parse("fn f(x: int) -> int { return x; } fn main(args: int[]) -> int { return f(1); }")
    f = unit.functions[0]
    assert f.name == "f" and len(f.body.stmts) == 1


def test_truncated_input_is_syntax_error():
    with pytest.raises(FrontendError) as e:
        parse_syntax("if (")
    assert "1:" in str(e.value)


@pytest.mark.parametrize("src, needle", [
    ("fn main(args: int[]) -> int { return y; }", "y"),
    ("fn main(args: int[]) -> int { bool b = 1; return 0; }", "type"),
    ("fn main(args: int[]) -> int { break; }", "break"),
    ("fn main(args: int[]) -> int { return 99999999999999999999; }", "range"),
    ("fn main(args: int[]) -> int { try { } catch Oops { } return 0; }", "Oops"),
])
def test_semantic_errors(src, needle):
    with pytest.raises(FrontendError) as e:
        parse(src)
    assert needle in str(e.value)


def test_straight_line_lowers_to_one_block():
    p = compile_source("fn main(args: int[]) -> int { int a = 1; int b = 2; return a + b; }")
    fn = p.function("main")
    assert len(fn.blocks) == 1
    assert fn.instruction_count() == 4


def test_while_loop_has_back_edge(binary_search):
    from cfo.ir import dominators
    fn = binary_search.function("binarySearch")
    dom = dominators(fn)
    back = [(b.id, s) for b in fn.blocks for s in b.successors() if dom.dominates(s, b.id)]
    assert back, "expected a back edge to the loop header"
    header = back[0][1]
    assert fn.block(header).term.op == "br"


def test_try_catch_lowering():
    p = compile_source("""
        fn main(args: int[]) -> int {
            try { print(args[0]); } catch { print(-1); }
            return 0;
        }""")
    fn = p.function("main")
    assert len(fn.traps) >= 1
    handler = fn.traps[0].handler
    preds = fn.predecessor_map(with_traps=False)
    assert preds[handler] == []
    assert fn.block(handler).instrs[0].op == "catch"


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_round_trip(name):
    src = corpus_source(name)
    program = compile_source(src, name)
    assert verify(program) == []
    text = emit_text(program)
    again = parse_text(text)
    assert again == program
    assert emit_text(again) == text
    # lowering is deterministic
    assert emit_text(compile_source(src, name)) == text


@pytest.mark.parametrize("name", corpus_names())
def test_unparse_reparses_to_same_tree(name):
    unit = parse(corpus_source(name), name)
    again = parse(unparse(unit), name)
    assert again.functions == unit.functions
    assert check_unit(again) == []
    assert emit_text(lower(again)) == emit_text(lower(unit))
