import json
import subprocess
import sys
from pathlib import Path

import pytest

from cfo.cli import main
from cfo.harness import corpus_dir

BS = str(corpus_dir() / "binary_search.mini")


def _cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_binary_search(capsys):
    code, out, err = _cli(capsys, "run", BS, "--", "2", "3", "4", "10", "40")
    assert code == 0
    assert out.splitlines() == ["2", "3", "4", "10", "40", "Element was found at index ", "4"]
    assert "returned(0)" in err


def test_run_null_input(capsys):
    code, out, err = _cli(capsys, "run", str(corpus_dir() / "straight_line.mini"), "--null")
    assert code == 0
    assert "NullAccess" in err


def test_run_rejects_non_integer(capsys):
    code, _, err = _cli(capsys, "run", BS, "--", "x")
    assert code == 1 and "integers" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = _cli(capsys, "metrics", str(tmp_path / "nope.mini"))
    assert code == 1 and "cannot read" in err


def test_parse_error_has_location(capsys, tmp_path):
    bad = tmp_path / "bad.mini"
    bad.write_text("fn main(args: int[]) -> int { return 1 }\n")
    code, _, err = _cli(capsys, "run", str(bad))
    assert code == 1
    assert str(bad) in err and ":1:" in err


def test_unknown_pass_lists_valid_ids(capsys):
    code, _, err = _cli(capsys, "obfuscate", BS, "--pass", "not_a_pass")
    assert code == 1
    assert "not_a_pass" in err and "control_flow_flattening" in err


def test_pass_and_level_conflict(capsys):
    code, _, err = _cli(capsys, "obfuscate", BS, "--pass", "reorder_blocks", "--level", "light")
    assert code == 1 and "mutually exclusive" in err


def test_obfuscate_report(capsys, tmp_path):
    report, out_ir = tmp_path / "r.json", tmp_path / "o.ir"
    code, _, _ = _cli(capsys, "obfuscate", BS, "--level", "aggressive", "--seed", "7",
                      "--report", str(report), "-o", str(out_ir))
    assert code == 0
    data = json.loads(report.read_text())
    assert data["diff"]["status"] == "equal"
    assert {"schema", "input", "requested", "passes", "skipped", "metrics_before", "metrics_after",
            "deltas", "classification", "diff", "dr_proxies"} <= set(data)
    assert data["deltas"]["delta"]["instructions"] > 0
    assert any(p["id"] == "control_flow_flattening" for p in data["passes"])
    assert out_ir.read_text().startswith("program")


def test_obfuscate_emit_src_only_for_source_passes(capsys, tmp_path):
    code, out, _ = _cli(capsys, "obfuscate", BS, "--pass", "code_clone_iv", "--emit", "src")
    assert code == 0 and "fn main" in out
    code, _, err = _cli(capsys, "obfuscate", BS, "--pass", "reorder_blocks", "--emit", "src")
    assert code == 1 and "--emit ir" in err


def test_diff_identical_files(capsys, tmp_path):
    code, ir, _ = _cli(capsys, "obfuscate", BS, "--pass", "reorder_blocks")
    a, b = tmp_path / "a.ir", tmp_path / "b.ir"
    a.write_text(ir)
    b.write_text(ir)
    code, out, _ = _cli(capsys, "diff", str(a), str(b), "--inputs", "20", "--seed", "3")
    assert code == 0 and out.strip() == "equal"


def test_diff_mismatch(capsys, tmp_path):
    a, b = tmp_path / "a.mini", tmp_path / "b.mini"
    a.write_text("fn main(args: int[]) -> int { print(1); return 0; }\n")
    b.write_text("fn main(args: int[]) -> int { print(2); return 0; }\n")
    code, out, _ = _cli(capsys, "diff", str(a), str(b), "--format", "json")
    data = json.loads(out)
    assert code == 1 and data["status"] == "mismatch"
    assert data["first_divergence"]["original"] == "1"


def test_catalog_json_counts(capsys):
    code, out, _ = _cli(capsys, "catalog", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and len(rows) == 43


def test_catalog_predicates(capsys):
    code, out, _ = _cli(capsys, "catalog", "--predicates", "--format", "json")
    fams = json.loads(out)["families"]
    assert code == 0
    assert all(f["proof"].startswith("docs/predicates.md#") for f in fams)


def test_gen_is_deterministic_and_compiles(capsys, tmp_path):
    _, first, _ = _cli(capsys, "gen", "--seed", "4", "--features", "if,while,arrays")
    _, again, _ = _cli(capsys, "gen", "--seed", "4", "--features", "if,while,arrays")
    assert first == again
    src = tmp_path / "g.mini"
    src.write_text(first)
    code, _, _ = _cli(capsys, "run", str(src), "--", "1", "2")
    assert code == 0


def test_gen_bad_feature(capsys):
    code, _, err = _cli(capsys, "gen", "--features", "goto")
    assert code == 1 and "unknown features" in err


@pytest.mark.parametrize("fmt", ["text", "json"])
def test_metrics(capsys, fmt):
    code, out, _ = _cli(capsys, "metrics", BS, "--format", fmt)
    assert code == 0
    if fmt == "json":
        assert json.loads(out)["functions"] == 3
    else:
        assert "cyclomatic" in out


def test_console_script_rerun_is_byte_identical(tmp_path):
    def once(tag):
        ir, rep = tmp_path / f"{tag}.ir", tmp_path / f"{tag}.json"
        proc = subprocess.run(
            [sys.executable, "-m", "cfo", "obfuscate", BS, "--level", "aggressive", "--seed", "7",
             "-o", str(ir), "--report", str(rep)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        return ir.read_bytes(), rep.read_bytes()

    assert once("a") == once("b")
    assert json.loads(Path(tmp_path / "a.json").read_text())["diff"]["status"] == "equal"
