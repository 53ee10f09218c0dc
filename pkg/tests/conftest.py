import numpy as np
import pytest

from gbpwls import corpus
from gbpwls.randomness import seeded_instance


@pytest.fixture(scope="session")
def ring8():
    return corpus.build("ring8")


@pytest.fixture(scope="session")
def ring8_seeded(ring8):
    return seeded_instance(ring8, 7)


@pytest.fixture(scope="session")
def tree15():
    return corpus.build("tree15")


@pytest.fixture(scope="session")
def tree15_seeded(tree15):
    return seeded_instance(tree15, 7)


def assert_close(a, b, tol=1e-10, what=""):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    err = np.abs(a - b).max() / (1.0 + np.abs(b).max())
    assert err < tol, f"{what} mismatch: {err:.3e} (tol {tol:g})"


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
