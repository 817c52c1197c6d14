import math

import numpy as np
import pytest

from ch6relax import Domain, classical
from ch6relax.galerkin import GalerkinSystem

TWO_PI = 2 * math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def line():
    """1D box of length 2 pi with 16 modes (cos(qx) is mode 2q)."""
    return Domain(TWO_PI, 16)


@pytest.fixture
def square():
    return Domain((math.pi, math.pi), (8, 8))


@pytest.fixture
def acceptance_data():
    """Initial data of the rate experiment on a 64-mode line."""
    d = Domain(TWO_PI, 64)
    phi0 = d.cosine(1.0, 0.2) + d.cosine(2.0, 0.05)
    rho0 = d.cosine(1.0, 0.1)
    return d, phi0, rho0


@pytest.fixture
def classical_system(line):
    return GalerkinSystem(line, classical())


def smooth_field(domain, rng, decay=0.1, scale=1.0):
    return scale * rng.standard_normal(domain.modes) * np.exp(-decay * domain.eigenvalues)


# -- acceptance verdicts, echoed in the terminal summary --------------------------

VERDICTS = []


def record_verdict(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    VERDICTS.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(VERDICTS):
            terminalreporter.write_line(line)
