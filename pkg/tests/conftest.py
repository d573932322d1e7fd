import math

import numpy as np
import pytest
from scipy.linalg import expm

from waveguide_tomo.model import ModulationPulse, TwoQubitPreparation

ACCEPTANCE_LINES: list[str] = []


def generator(f: float, kd: float) -> np.ndarray:
    """Right-hand side matrix written out independently of the package."""
    e = np.exp(1j * kd)
    return -0.5 * np.array([[1, e, e * e], [e, 1 + 2j * f, e], [e * e, e, 1]])


def exact_piecewise(b0, pulse: ModulationPulse, kd: float, t_final: float) -> np.ndarray:
    """Exact solution for a piecewise-constant pulse by chaining matrix exponentials."""
    assert pulse.is_piecewise_constant
    cuts = sorted({0.0, t_final, *(e for e in pulse.edges if 0 < e < t_final)})
    b = np.asarray(b0, dtype=complex)
    for a, c in zip(cuts, cuts[1:]):
        f = pulse.value(0.5 * (a + c))
        b = expm(generator(f, kd) * (c - a)) @ b
    return b


@pytest.fixture
def equal_prep():
    """Equal amplitudes with phi3 - phi1 = 0.4 pi (the fig3/fig4 preset state)."""
    return TwoQubitPreparation(1 / math.sqrt(2), 1 / math.sqrt(2), 0.0, 0.4 * math.pi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
