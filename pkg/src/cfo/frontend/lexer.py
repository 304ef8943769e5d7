"""Tokenizer for MiniLang."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .ast import Span

KEYWORDS = frozenset({
    "fn", "int", "bool", "void", "if", "else", "while", "for", "switch", "case",
    "default", "break", "continue", "return", "throw", "try", "catch", "true",
    "false", "null", "new",
})

# longest operators first so that "<=" wins over "<"
_PUNCT = [
    "->", "++", "--", "+=", "-=", "*=", "==", "!=", "<=", ">=", "&&", "||",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "^", "(", ")", "{", "}", "[", "]",
    ",", ";", ":", "|",
]

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<line_comment>//[^\n]*)"
    r"|(?P<block_comment>/\*.*?\*/)"
    r"|(?P<int>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r'|(?P<string>"(?:[^"\\\n]|\\.)*")'
    r"|(?P<punct>" + "|".join(re.escape(p) for p in _PUNCT) + ")",
    re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int" | "ident" | "string" | "kw" | "punct" | "eof"
    text: str
    span: Span = field(compare=False)
    value: object = None


@dataclass(frozen=True)
class Diagnostic:
    span: Span | None
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        return f"{where}{self.message}{exp}"


class FrontendError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        span = Span(line, pos - line_start + 1)
        if text.startswith("/*", pos) and text.find("*/", pos + 2) < 0:
            raise FrontendError([Diagnostic(span, "unterminated comment")])
        if m is None:
            raise FrontendError([Diagnostic(span, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "int":
            tokens.append(Token("int", lexeme, span, int(lexeme)))
        elif kind == "ident":
            tokens.append(Token("kw" if lexeme in KEYWORDS else "ident", lexeme, span))
        elif kind == "string":
            try:
                value = json.loads(lexeme)
            except json.JSONDecodeError:
                raise FrontendError([Diagnostic(span, "bad string escape")]) from None
            tokens.append(Token("string", lexeme, span, value))
        elif kind == "punct":
            tokens.append(Token("punct", lexeme, span))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "<end of input>", Span(line, pos - line_start + 1)))
    return tokens
