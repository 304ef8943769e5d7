"""MiniLang front end: lexer, parser, semantic checks, lowering and unparsing."""
from __future__ import annotations

from ..ir.model import Program
from .ast import SourceUnit, max_nesting
from .lexer import Diagnostic, FrontendError
from .lower import lower
from .parser import check_unit, parse, parse_syntax
from .unparse import unparse


def compile_source(source: str, path: str = "<input>") -> Program:
    """Parse, check and lower in one step."""
    return lower(parse(source, path))


__all__ = [
    "Diagnostic", "FrontendError", "SourceUnit", "check_unit", "compile_source", "lower",
    "max_nesting", "parse", "parse_syntax", "unparse",
]
