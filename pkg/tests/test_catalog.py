import json

import pytest

from cfo import catalog
from cfo.transforms import pass_ids


def test_counts():
    s = catalog.summary()
    assert s["rows"] == 43
    assert s["literature"] == 36 and s["tools_only"] == 7
    assert set(s["levels"]) == set(catalog.LEVELS)
    rows = catalog.registry()
    assert all(r.in_literature or r.in_tools for r in rows)


def test_flattening_row():
    r = next(r for r in catalog.registry() if r.name == "Control Flow Flattening")
    assert (r.level, r.paradigm, r.in_tools, r.dr) == ("basic_block", "code_insertion", False, False)


def test_intersecting_loop_is_dr():
    r = next(r for r in catalog.registry() if r.name == "Intersecting Loop")
    assert r.dr


def test_classify():
    r = catalog.classify("control_flow_flattening")
    assert (r.level, r.paradigm, r.dr) == ("basic_block", "code_insertion", False)
    r = catalog.classify("table_interpretation")
    assert (r.level, r.paradigm, r.dr) == ("method", "method_transformation", True)
    assert catalog.classify("dead_code_insertion:dead_switch").name == "Adding Dead Code Switch Stmts."
    with pytest.raises(catalog.UnknownPass):
        catalog.classify("unknown_pass")


def test_method_reordering_is_structural_only():
    r = catalog.classify("method_reordering")
    assert r.structural_only and r not in catalog.registry()


def test_text_table_rows():
    lines = catalog.emit_table("text").splitlines()
    assert len(lines) == 44


def test_json_round_trip():
    text = catalog.emit_table("json")
    assert json.loads(text)["schema"] == 1
    assert catalog.parse_json_table(text) == catalog.registry()


def test_implemented_ids_are_registered():
    implemented = catalog.implemented_pass_ids()
    assert sum(r.implemented for r in catalog.registry()) == 36
    assert sorted(implemented) == sorted(pass_ids())
    assert "method_reordering" in implemented


def test_out_of_scope_rows_explain_themselves():
    for r in catalog.registry():
        assert r.implemented != bool(r.out_of_scope)


def test_bad_format():
    with pytest.raises(ValueError):
        catalog.emit_table("xml")
