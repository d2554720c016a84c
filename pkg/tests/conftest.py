import numpy as np
import pytest

from symproj.spins import coherent_spin_ket


def ket_x(N, sign=1):
    return coherent_spin_ket("x" if sign > 0 else "-x", N)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
