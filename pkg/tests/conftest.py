import numpy as np
import pytest

from lsgm.graph import SparseGraph


def random_graph(n, p, rng):
    upper = np.triu(rng.random((n, n)) < p, 1)
    return SparseGraph.from_dense((upper | upper.T).astype(np.int8))


def noisy_copy(g, flip, rng):
    n = g.n
    noise = np.triu(rng.random((n, n)) < flip, 1)
    noise = noise | noise.T
    return SparseGraph.from_dense(np.abs(g.to_dense().astype(np.int8) - noise))


def random_orthogonal(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
