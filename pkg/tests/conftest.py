import numpy as np
import pytest

from qbmdarwin import Model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_model():
    """A 20-oscillator bath, cheap enough for exhaustive checks."""
    return Model.build(0.5, squeezing_r=1.0, n_osc=20, kappa=0.05)


@pytest.fixture(scope="session")
def tiny_model():
    return Model.build(0.45, squeezing_r=0.5, n_osc=3, kappa=0.05)


@pytest.fixture(scope="session")
def free_model():
    """No coupling: system and bath evolve independently."""
    return Model.build(0.6, squeezing_r=1.0, n_osc=6, kappa=0.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
