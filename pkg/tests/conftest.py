import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fuzzmat import GrayImage  # noqa: E402
from oracles import TEXTURE  # noqa: E402


@pytest.fixture
def texture():
    """4x4 reference texture with gray levels 1..4 and L=5."""
    return GrayImage(np.array(TEXTURE), 5)


def random_images(n, shape=(8, 8), levels=(4, 8), seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        L = int(levels[k % len(levels)])
        out.append(GrayImage(rng.integers(0, L, size=shape), L))
    return out


@pytest.fixture(scope="session")
def random200():
    return random_images(200, levels=(4, 8), seed=1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
