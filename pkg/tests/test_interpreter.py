import pytest

from cfo.frontend import compile_source
from cfo.interpreter import Interpreter, default_fuel, run, run_traced, run_with_coverage, tdiv, trem, wrap

INT_MIN, INT_MAX = -(1 << 63), (1 << 63) - 1


def _main(body: str, extra: str = ""):
    return compile_source(extra + "fn main(args: int[]) -> int {" + body + "}")


def test_binary_search_found(binary_search):
    r = run(binary_search, [2, 3, 4, 10, 40])
    assert r.outcome.kind == "returned"
    assert r.output == ["2", "3", "4", "10", "40", "Element was found at index ", "4"]


def test_binary_search_absent(binary_search):
    r = run(binary_search, [2, 3, 4, 40])
    assert r.output[-1] == "Element not present"


def test_index_out_of_bounds_traps():
    r = run(_main("return args[len(args)];"), [1, 2])
    assert r.outcome.kind == "trapped" and r.outcome.trap_kind == "IndexOutOfBounds"


def test_null_access_traps():
    r = run(_main("return len(args);"), None)
    assert r.outcome.trap_kind == "NullAccess"


def test_caught_trap_binds_code():
    p = _main("try { throw(42); } catch User (e) { print(e); } "
              "try { print(1 / (len(args) - len(args))); } catch (e) { print(e); } return 0;")
    assert run(p, []).output == ["42", "-3"]


def test_wrapping_and_truncation():
    assert wrap(INT_MAX + 1) == INT_MIN
    assert tdiv(-7, 2) == -3 and trem(-7, 2) == -1
    assert wrap(tdiv(INT_MIN, -1)) == INT_MIN
    p = _main("int x = 9223372036854775807; x = x + 1; print(x); print(-7 / 2); print(-7 % 2); return 0;")
    assert run(p, []).output == [str(INT_MIN), "-3", "-1"]


def test_coverage_straight_line():
    p = _main("int a = 1; int b = 2; print(a + b); return 0;")
    result, cov = run_with_coverage(p, [])
    fn = p.function("main")
    assert len(fn.blocks) == 1
    n = len(fn.blocks[0].instrs) + 1
    assert all(cov[("main", 0, i)] == 1 for i in range(n))
    assert cov.total() == result.steps


def test_coverage_loop_counts():
    p = _main("int s = 0; for (int i = 0; i < 10; i++) { s = s + i; } print(s); return 0;")
    _, cov = run_with_coverage(p, [])
    fn = p.function("main")
    body = next(b for b in fn.blocks if any(i.op == "add" for i in b.instrs)
                and b.term.op == "jmp")
    counts = {cov[("main", body.id, i)] for i in range(len(body.instrs) + 1)}
    assert counts == {10}


def test_fuel_exhaustion():
    p = _main("while (true) { } return 0;")
    r = run(p, [], fuel=1000)
    assert r.outcome.kind == "fuel_exhausted" and r.steps == 1000


def test_fuel_env_override(monkeypatch):
    monkeypatch.setenv("CFO_FUEL", "1234")
    assert default_fuel() == 1234
    monkeypatch.delenv("CFO_FUEL")
    assert default_fuel() == 10_000_000


def test_interpreter_is_reusable(binary_search):
    interp = Interpreter(binary_search)
    a = interp.run([1, 10], 10**6)
    interp.run(None, 10**6)
    b = interp.run([1, 10], 10**6)
    assert a.observable() == b.observable() and a.steps == b.steps


def test_trace_starts_in_entry(binary_search):
    _, trace = run_traced(binary_search, [10])
    assert trace[0] == ("main", binary_search.function("main").entry)
    assert ("binarySearch", binary_search.function("binarySearch").entry) in trace


def test_steps_never_exceed_fuel(binary_search):
    full = run(binary_search, [1, 2, 10]).steps
    for fuel in range(1, full + 1):
        r = run(binary_search, [1, 2, 10], fuel=fuel)
        assert r.steps <= fuel
        if fuel < full:
            assert r.outcome.kind == "fuel_exhausted" and r.steps == fuel
        else:
            assert r.outcome.kind == "returned"


def test_recursion_depth_limit():
    p = compile_source("fn f(n: int) -> int { return f(n + 1); } "
                       "fn main(args: int[]) -> int { return f(0); }")
    r = run(p, [])
    assert r.outcome.kind in ("trapped", "fuel_exhausted")


@pytest.mark.parametrize("name", ["straight_line"])
def test_null_input_trap_is_observable(corpus, name):
    assert run(corpus[name], None).outcome.kind == "trapped"
