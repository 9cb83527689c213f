import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cptree import cells  # noqa: E402
from cptree import tensorops as T  # noqa: E402
from cptree.trees import parse_ptb  # noqa: E402

SAMPLE_ = "(ROOT (X (NP (ADJP (JJ Effective) (CC but) (JJ too-tepid)) (NN biopic))))"


@pytest.fixture
def sample():
    return parse_ptb(SAMPLE_)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def randomize(p, rng, scale=0.5):
    """Overwrite every parameter with normal draws (biases included)."""
    for v in p.values():
        v.value[...] = rng.normal(0.0, scale, v.value.shape)
    return p


def random_state(rng, d, scale=0.5):
    return cells.NodeState(T.Var(rng.normal(0, scale, d)), T.Var(rng.normal(0, scale, d)))


ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    def record(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
