import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from penaltylab.corpus import corpus_names, load_corpus_problem


@pytest.fixture(scope="session")
def corpus():
    return {name: load_corpus_problem(name) for name in corpus_names()}
