"""CFG-based intermediate representation: model, verification, analyses, text form."""
from .analysis import (
    DominatorTree, Loop, def_use, dominators, graph_is_reducible, immediate_dominators,
    is_reducible, is_topological, liveness, natural_loops, reachable_blocks,
)
from .model import (
    ALL_KINDS, ARR, BOOL, BUILTIN_CODES, DIV_BY_ZERO, INDEX_OOB, INT, NULL_ACCESS,
    TRAP_KINDS, USER, VOID, Block, Function, Instr, Program, TrapEntry,
)
from .text import IRTextError, emit_text, format_instr, parse_text
from .verify import Diagnostic, VerifyError, check, verify

__all__ = [
    "ALL_KINDS", "ARR", "BOOL", "BUILTIN_CODES", "DIV_BY_ZERO", "INDEX_OOB", "INT",
    "NULL_ACCESS", "TRAP_KINDS", "USER", "VOID",
    "Block", "Diagnostic", "DominatorTree", "Function", "IRTextError", "Instr", "Loop",
    "Program", "TrapEntry", "VerifyError",
    "check", "def_use", "dominators", "emit_text", "format_instr", "graph_is_reducible",
    "immediate_dominators", "is_reducible", "is_topological", "liveness", "natural_loops",
    "parse_text", "reachable_blocks", "verify",
]
