import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opra.graph import load_graph

DATA = Path(__file__).parent.parent / "src" / "opra" / "data"


@pytest.fixture(scope="session")
def map_graph():
    return load_graph(DATA / "map_graph.json")


@pytest.fixture(scope="session")
def corpus_dir():
    return DATA / "corpus"


def corpus_texts():
    out = {}
    for path in sorted((DATA / "corpus").glob("*.opra")):
        out[path.stem] = path.read_text()
    return out
