import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from shotwise.probdist import ProbDist

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
QASM_VALID = Path(__file__).resolve().parents[1] / "src" / "shotwise" / "data" / "qasm"
QASM_MALFORMED = DATA / "qasm" / "malformed"


def random_dist(rng: np.random.Generator, num_qubits: int, sparsity: float = 0.0) -> ProbDist:
    w = rng.random(1 << num_qubits)
    if sparsity:
        w[rng.random(w.size) < sparsity] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
    return ProbDist.from_weights(num_qubits, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(module, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for number in sorted(module.RESULTS):
                terminalreporter.write_line(module.RESULTS[number])
