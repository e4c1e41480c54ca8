import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from relcomp.embeddings import EmbeddingStore  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_store(words, matrix, casefold=True):
    return EmbeddingStore(tuple(words), np.asarray(matrix, dtype=float), casefold=casefold)


@pytest.fixture
def random_store(rng):
    words = [f"w{i}" for i in range(50)]
    return make_store(words, rng.standard_normal((50, 8)))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
