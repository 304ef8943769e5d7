"""Technique classification data and the table emitter.

The 43 rows are stored in table order with their literature/tool marks, the
decompiler-resistance flag and the obfuscating paradigm. Rows backed by a
pass carry its id. Method reordering is kept as a separate, structural-only
record: it changes function layout without changing control flow.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

LEVELS = ("expression", "statement", "basic_block", "method", "class")
PARADIGMS = (
    "opaque_predicate", "ordering", "substitution", "loop_transformation",
    "code_insertion", "method_transformation", "class_transformation",
)


@dataclass(frozen=True)
class TechniqueRecord:
    name: str
    level: str
    paradigm: str
    in_literature: bool
    in_tools: bool
    dr: bool
    pass_id: str | None = None
    structural_only: bool = False
    out_of_scope: str | None = None

    @property
    def implemented(self) -> bool:
        return self.pass_id is not None

    @property
    def both(self) -> bool:
        return self.in_literature and self.in_tools

    def to_dict(self) -> dict:
        d = asdict(self)
        d["implemented"] = self.implemented
        d["both"] = self.both
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TechniqueRecord":
        keys = ("name", "level", "paradigm", "in_literature", "in_tools", "dr", "pass_id",
                "structural_only", "out_of_scope")
        return cls(**{k: d[k] for k in keys})


class UnknownPass(KeyError):
    pass


_NO_CLASSES = "MiniLang has no classes or objects"

# (name, level, paradigm, literature, tools, dr, pass id or out-of-scope reason)
_ROWS = [
    ("Extending Conditionals", "expression", "opaque_predicate", 1, 1, 0, "extend_conditionals"),
    ("Adding Redundant Operands", "expression", "opaque_predicate", 1, 1, 0, "add_redundant_operands"),
    ("Reordering Expressions", "expression", "ordering", 1, 1, 0, "reorder_expressions"),
    ("Reordering Statements", "statement", "ordering", 1, 1, 0, "reorder_statements"),
    ("Remove Lib. and Program Idioms", "statement", "substitution", 1, 1, 0, "remove_library_idioms"),
    ("Instruction Substitution", "statement", "substitution", 1, 1, 0, "instruction_substitution"),
    ("Replacing if(Non) Null Instructions With Try-Catch Block", "statement", "substitution", 1, 1, 0,
     "guard_to_trap"),
    ("Converting Branches to jsr Instr.", "statement", "substitution", 1, 1, 0,
     "!jsr is a JVM-only subroutine instruction with no IR counterpart"),
    ("Opaque Branch Insertion", "basic_block", "opaque_predicate", 0, 1, 0, "opaque_branch_insertion"),
    ("Dead Code Insertion", "basic_block", "opaque_predicate", 1, 1, 0, "dead_code_insertion"),
    ("Adding Dead Code Switch Stmts.", "basic_block", "opaque_predicate", 1, 1, 0, "dead_code_insertion:dead_switch"),
    ("Reordering Loops", "basic_block", "ordering", 1, 0, 0, "reorder_loops"),
    ("Reordering Code Blocks", "basic_block", "ordering", 1, 0, 0, "reorder_blocks"),
    ("Finding and Reusing Duplicate Seq.", "basic_block", "ordering", 1, 1, 0, "duplicate_sequence_reuse"),
    ("Reorder Load Instrs. Above if Instr.", "basic_block", "ordering", 1, 1, 0, "hoist_common_branch_code"),
    ("Loop Fission", "basic_block", "loop_transformation", 1, 0, 0, "loop_fission"),
    ("Loop Blocking", "basic_block", "loop_transformation", 1, 0, 0, "loop_blocking"),
    ("Loop Unrolling", "basic_block", "loop_transformation", 1, 0, 0, "loop_unrolling"),
    ("Intersecting Loop", "basic_block", "loop_transformation", 1, 0, 1, "intersecting_loops"),
    ("Replace with Equivalent Codes", "basic_block", "substitution", 1, 1, 0, "replace_equivalent_codes"),
    ("Code Clone Type IV", "basic_block", "substitution", 1, 1, 0, "code_clone_iv"),
    ("Basic Block Fission", "basic_block", "code_insertion", 1, 0, 1, "basic_block_fission"),
    ("Insert Dummy Loop", "basic_block", "code_insertion", 1, 1, 0, "insert_dummy_loop"),
    ("Goto Instruction Augmentation", "basic_block", "code_insertion", 1, 1, 1, "goto_augmentation"),
    ("Irrelevant Code Insertion", "basic_block", "code_insertion", 1, 1, 0, "irrelevant_code_insertion"),
    ("Control Flow Flattening", "basic_block", "code_insertion", 1, 0, 0, "control_flow_flattening"),
    ("Boolean Splitter", "basic_block", "code_insertion", 0, 1, 0, "boolean_splitter"),
    ("Convert Reducible to Non-reducible Flowgraph", "basic_block", "code_insertion", 1, 1, 1,
     "reducible_to_irreducible"),
    ("Partially Trapping Switch Stmts", "basic_block", "code_insertion", 1, 1, 1, "partially_trapping_switch"),
    ("Disobeying Constructor Conventions", "basic_block", "code_insertion", 1, 1, 1,
     "!" + _NO_CLASSES + " (constructors)"),
    ("Combining Try Blocks with Their Catch Blocks", "basic_block", "code_insertion", 1, 1, 0,
     "combine_try_catch"),
    ("Indirecting if Instructions", "basic_block", "code_insertion", 0, 1, 1, "indirect_if"),
    ("Inline method", "method", "method_transformation", 1, 1, 0, "inline_method"),
    ("Outline Method", "method", "method_transformation", 1, 0, 0, "outline_method"),
    ("Clone Method", "method", "method_transformation", 1, 0, 0, "clone_method"),
    ("Interleave Methods", "method", "method_transformation", 1, 1, 0, "interleave_methods"),
    ("Dynamic Inliner", "method", "method_transformation", 0, 1, 0,
     "!" + _NO_CLASSES + " (virtual dispatch)"),
    ("Building API Buffer Methods", "method", "method_transformation", 0, 1, 0, "api_buffer_methods"),
    ("Table Interpretation", "method", "method_transformation", 1, 0, 1, "table_interpretation"),
    ("Parallelizing the Code", "method", "method_transformation", 1, 0, 0, "!MiniLang has no threads"),
    ("Split Objects", "class", "class_transformation", 0, 1, 0, "!" + _NO_CLASSES),
    ("Class Splitter", "class", "class_transformation", 0, 1, 0, "!" + _NO_CLASSES),
    ("Building Library Buffer Classes", "class", "class_transformation", 1, 1, 0, "!" + _NO_CLASSES),
]


def _record(row) -> TechniqueRecord:
    name, level, paradigm, lit, tools, dr, target = row
    if target.startswith("!"):
        return TechniqueRecord(name, level, paradigm, bool(lit), bool(tools), bool(dr),
                               None, False, target[1:])
    return TechniqueRecord(name, level, paradigm, bool(lit), bool(tools), bool(dr), target)


_REGISTRY = tuple(_record(r) for r in _ROWS)

METHOD_REORDERING = TechniqueRecord(
    "Method Reordering", "method", "ordering", True, False, False, "method_reordering",
    structural_only=True,
)


def registry() -> list[TechniqueRecord]:
    """The 43 table rows in table order."""
    return list(_REGISTRY)


def all_records() -> list[TechniqueRecord]:
    return list(_REGISTRY) + [METHOD_REORDERING]


def pass_base(pass_id: str) -> str:
    return pass_id.split(":", 1)[0]


def classify(pass_id: str) -> TechniqueRecord:
    """Record of a pass id; ``pass:variant`` forms resolve to the variant's row when it has one."""
    for rec in all_records():
        if rec.pass_id == pass_id:
            return rec
    base = pass_base(pass_id)
    for rec in all_records():
        if rec.pass_id == base:
            return rec
    raise UnknownPass(pass_id)


def implemented_pass_ids() -> list[str]:
    """Distinct runnable pass ids (variants folded into their base pass)."""
    out: list[str] = []
    for rec in all_records():
        if rec.pass_id is not None and pass_base(rec.pass_id) not in out:
            out.append(pass_base(rec.pass_id))
    return out


def summary() -> dict:
    rows = registry()
    return {
        "rows": len(rows),
        "levels": {lv: sum(r.level == lv for r in rows) for lv in LEVELS},
        "literature": sum(r.in_literature for r in rows),
        "tools_only": sum(r.in_tools and not r.in_literature for r in rows),
        "dr": sum(r.dr for r in rows),
        "implemented": sum(r.implemented for r in rows),
    }


_COLUMNS = ("name", "level", "literature", "tools", "dr", "paradigm", "implemented")


def emit_table(fmt: str = "text") -> str:
    rows = registry()
    if fmt == "json":
        return json.dumps({"schema": 1, "rows": [r.to_dict() for r in rows]}, indent=2) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    mark = lambda b: "Y" if b else "N"  # noqa: E731
    table = [_COLUMNS]
    for r in rows:
        table.append((r.name, r.level, mark(r.in_literature), mark(r.in_tools), mark(r.dr),
                      r.paradigm, r.pass_id or "-"))
    widths = [max(len(row[i]) for row in table) for i in range(len(_COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines) + "\n"


def parse_json_table(text: str) -> list[TechniqueRecord]:
    data = json.loads(text)
    return [TechniqueRecord.from_dict(d) for d in data["rows"]]
