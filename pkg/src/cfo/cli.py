"""Command-line interface: ``cfo obfuscate | run | diff | catalog | gen | metrics``.

Exit status is 0 on success, 1 on user errors (bad input, unknown pass,
conflicting flags, and a ``diff`` mismatch) and 2 when an internal
invariant is violated.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import catalog
from .frontend import FrontendError, compile_source, unparse
from .harness import FEATURES, GenConfig, differential_test, gen_program
from .interpreter import default_fuel, run
from .ir import IRTextError, Program, emit_text, parse_text, verify
from .opaque import predicate_table
from .metrics import compute_metrics, dr_proxies, potency_delta
from .transforms import (
    LEVELS, PassConfig, PassInvariantError, TransformError, is_known, pass_ids, pass_spec,
    pipeline_order, run_pipeline, variant_ids,
)

SCHEMA = 1


class UserError(Exception):
    pass


# -- helpers ----------------------------------------------------------------------------------

def load_program(path: str) -> Program:
    """A ``.mini`` source file or an IR text file (anything starting with ``program``)."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UserError(f"cannot read {path}: {e.strerror}") from None
    if path.endswith(".mini") or not text.lstrip().startswith("program"):
        return compile_source(text, path)
    program = parse_text(text)
    problems = verify(program)
    if problems:
        raise UserError(f"{path}: invalid IR: {problems[0]}")
    return program


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _selected_passes(args) -> list[str]:
    if args.passes and args.level:
        raise UserError("--pass and --level are mutually exclusive")
    if args.passes:
        unknown = [p for p in args.passes if not is_known(p)]
        if unknown:
            valid = ", ".join(pass_ids() + variant_ids())
            raise UserError(f"unknown pass {unknown[0]!r}; valid ids: {valid}")
        return list(args.passes)
    return list(LEVELS[args.level or "normal"])


def _stage_proxies(before: Program, after: Program) -> dict:
    b, a = dr_proxies(before), dr_proxies(after)
    return {
        "irreducible": a["irreducible"],
        "became_irreducible": a["irreducible"] and not b["irreducible"],
        "unaligned_trap_entries": a["unaligned_trap_entries"],
        "dispatch_loop_functions": a["dispatch_loop_functions"],
    }


def build_report(source_id: str, original: Program, ids: list[str], seed: int, n_inputs: int):
    """Run the pipeline and assemble the report; returns ``(final_program, report)``."""
    config = PassConfig(seed=seed)
    result = run_pipeline(original, ids, config)
    passes, classification, proxies = [], [], {}
    current = original
    for pid, res in result.applied:
        passes.append({"id": pid, "seed": seed, "sites": len(res.sites)})
        classification.append({"pass": pid, **pass_spec(pid).record.to_dict()})
        proxies[pid] = _stage_proxies(current, res.program)
        current = res.program
    verdict = differential_test(original, result.program, n_inputs, seed)
    before, after = compute_metrics(original), compute_metrics(result.program)
    report = {
        "schema": SCHEMA,
        "input": source_id,
        "requested": pipeline_order(ids),
        "passes": passes,
        "skipped": [{"id": pid, "reason": why} for pid, why in result.skipped],
        "metrics_before": before.to_dict(),
        "metrics_after": after.to_dict(),
        "deltas": potency_delta(before, after),
        "classification": classification,
        "diff": verdict.to_dict(),
        "dr_proxies": proxies,
    }
    return result.program, report


# -- subcommands ------------------------------------------------------------------------------

def cmd_obfuscate(args) -> int:
    ids = _selected_passes(args)
    original = load_program(args.file)
    final, report = build_report(args.file, original, ids, args.seed, args.inputs)
    if args.emit == "src":
        if final.source is None:
            raise UserError("--emit src needs every applied pass to be source-level; use --emit ir")
        artifact = unparse(final.source)
    else:
        artifact = emit_text(final)
    _write(args.output, artifact)
    if args.report:
        _write(args.report, _dump(report))
    if report["diff"]["status"] == "mismatch":
        print("error: transformed program diverges from the original", file=sys.stderr)
        return 2
    return 0


def _parse_inputs(values: list[str], null: bool):
    if null:
        if values:
            raise UserError("--null cannot be combined with input values")
        return None
    try:
        return [int(v) for v in values]
    except ValueError:
        raise UserError(f"inputs must be integers: {' '.join(values)}") from None


def cmd_run(args) -> int:
    program = load_program(args.file)
    values = list(args.values)
    if values[:1] == ["--null"]:  # REMAINDER swallows options given after FILE
        values, args.null = values[1:], True
    inputs = _parse_inputs([v for v in values if v != "--"], args.null)
    result = run(program, inputs, default_fuel())
    for item in result.output:
        print(item)
    print(f"[{result.outcome}; {result.steps} steps]", file=sys.stderr)
    return 0


def cmd_diff(args) -> int:
    a, b = load_program(args.original), load_program(args.transformed)
    verdict = differential_test(a, b, args.inputs, args.seed)
    if args.format == "json":
        sys.stdout.write(_dump(verdict.to_dict()))
    else:
        print(verdict.status)
        if verdict.first_divergence is not None:
            d = verdict.first_divergence
            print(f"input {d.input}: item {d.position}: {d.original!r} != {d.transformed!r}")
    return 0 if verdict.status != "mismatch" else 1


def cmd_catalog(args) -> int:
    if not args.predicates:
        sys.stdout.write(catalog.emit_table(args.format))
        return 0
    rows = predicate_table()
    if args.format == "json":
        sys.stdout.write(_dump({"schema": SCHEMA, "families": rows}))
    else:
        for r in rows:
            print(f"{r['family']:18} {r['truth']:13} {r['template']:40} {r['proof']}")
    return 0


def cmd_gen(args) -> int:
    mask = FEATURES if args.features is None else tuple(f for f in args.features.split(",") if f)
    try:
        config = GenConfig(seed=args.seed, max_functions=args.max_functions,
                           max_blocks_per_function=args.max_blocks,
                           max_loop_depth=args.max_depth, feature_mask=frozenset(mask))
    except ValueError as e:
        raise UserError(str(e)) from None
    sys.stdout.write(unparse(gen_program(config)))
    return 0


def cmd_metrics(args) -> int:
    program = load_program(args.file)
    m = compute_metrics(program)
    if args.format == "json":
        sys.stdout.write(_dump(m.to_dict()))
    else:
        for k, v in m.to_dict().items():
            print(f"{k:18} {v}")
    return 0


# -- entry point ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfo", description="Control-flow obfuscation toolkit for MiniLang.")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("obfuscate", help="apply passes and write the transformed program")
    o.add_argument("file")
    o.add_argument("--pass", dest="passes", action="append", metavar="ID",
                   help="pass id, optionally pass:variant (repeatable)")
    o.add_argument("--level", choices=sorted(LEVELS))
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--report", metavar="PATH", help="write the JSON report here")
    o.add_argument("--emit", choices=("ir", "src"), default="ir")
    o.add_argument("-o", "--output", metavar="PATH", help="artifact path (default: stdout)")
    o.add_argument("--inputs", type=int, default=20, help="inputs for the differential check")
    o.set_defaults(func=cmd_obfuscate)

    r = sub.add_parser("run", help="execute main on the given input values")
    r.add_argument("file")
    r.add_argument("values", nargs=argparse.REMAINDER, help="-- v1 v2 ...")
    r.add_argument("--null", action="store_true", help="pass a null array")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diff", help="differential test of two programs")
    d.add_argument("original")
    d.add_argument("transformed")
    d.add_argument("--inputs", type=int, default=20)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--format", choices=("text", "json"), default="text")
    d.set_defaults(func=cmd_diff)

    c = sub.add_parser("catalog", help="print the technique catalog")
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.add_argument("--predicates", action="store_true", help="list opaque predicate families instead")
    c.set_defaults(func=cmd_catalog)

    g = sub.add_parser("gen", help="generate a random program")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--features", help=f"comma-separated subset of: {','.join(FEATURES)}")
    g.add_argument("--max-functions", type=int, default=3)
    g.add_argument("--max-blocks", type=int, default=128, help="lowered blocks per function")
    g.add_argument("--max-depth", type=int, default=3)
    g.set_defaults(func=cmd_gen)

    m = sub.add_parser("metrics", help="print CFG metrics of a program")
    m.add_argument("file")
    m.add_argument("--format", choices=("text", "json"), default="text")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UserError, IRTextError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FrontendError as e:
        for d in e.diagnostics:
            print(f"{args.__dict__.get('file', '<input>')}:{d}", file=sys.stderr)
        return 1
    except PassInvariantError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except TransformError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - anything else is a bug, not a user error
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
