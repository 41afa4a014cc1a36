import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kklattice.lattice import LatticeSpec
from kklattice.potentials import KKPotential

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=50
)
settings.load_profile("default")

Q0 = np.pi / 2


@pytest.fixture
def unit():
    return LatticeSpec()


@pytest.fixture
def wide():
    return LatticeSpec(n_min=-200, n_max=200)


@pytest.fixture
def fig_potential():
    """Drifting carrier potential of the figure runs (v set per test)."""
    return KKPotential(V0=1j, Omega=10.0, alpha=0.3, m=1, v=0.4)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
