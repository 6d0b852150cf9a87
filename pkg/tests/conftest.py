import math

import numpy as np
import pytest

from dichromatic.model import SystemParams

GAMMA = 2 * math.pi * 1e4
GAMMA_M = 2 * math.pi * 1e2
OMEGA_M = 2 * math.pi * 1e6


@pytest.fixture
def canonical():
    """Desk-scale parameters at the resonant SQL power K(0) = gamma_m."""
    return SystemParams.canonical()


@pytest.fixture
def strong():
    """Canonical parameters at K(0) = 100 gamma_m."""
    return SystemParams.canonical(K0=100 * GAMMA_M)


@pytest.fixture
def grid():
    return np.concatenate([np.linspace(-20 * GAMMA_M, 20 * GAMMA_M, 41), [-0.3 * GAMMA, 0.3 * GAMMA]])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
