import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cfo.harness import corpus_names, load_corpus  # noqa: E402

CORPUS = corpus_names()


@pytest.fixture(scope="session")
def corpus():
    return {name: load_corpus(name) for name in CORPUS}


@pytest.fixture(scope="session")
def binary_search():
    return load_corpus("binary_search")
