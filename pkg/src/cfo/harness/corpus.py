"""The fixed sample programs shipped with the package."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..frontend import compile_source
from ..ir.model import Program


def corpus_dir() -> Path:
    return Path(str(resources.files("cfo") / "corpus"))


def corpus_names() -> list[str]:
    return sorted(p.stem for p in corpus_dir().glob("*.mini"))


def corpus_source(name: str) -> str:
    return (corpus_dir() / f"{name}.mini").read_text()


def load_corpus(name: str) -> Program:
    return compile_source(corpus_source(name), f"corpus/{name}.mini")


def load_all() -> dict[str, Program]:
    return {n: load_corpus(n) for n in corpus_names()}
