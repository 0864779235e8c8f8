import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attribench.nn import MLP  # noqa: E402

ACCEPTANCE_LINES: list = []


def install(model: MLP, weights, biases) -> MLP:
    model.weights = [np.array(w, dtype=float) for w in weights]
    model.biases = [np.array(b, dtype=float) for b in biases]
    return model


@pytest.fixture
def linear_model():
    """Single affine layer with weights [2, -1] and zero bias."""
    return install(MLP([2, 1]), [[[2.0, -1.0]]], [[0.0]]).eval()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
