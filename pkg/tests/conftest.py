import numpy as np
import pytest

from tomolab.background import RingGeometry, Wavenumber
from tomolab.forward import simulate_ring
from tomolab.model import Grid2D, PhantomSpec, build_phantom
from tomolab.near2far import near_to_far

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def k():
    return Wavenumber.from_wavelength(8.0)


@pytest.fixture(scope="session")
def geom():
    return RingGeometry(32.0, 60)


@pytest.fixture(scope="session")
def grid():
    return Grid2D.default()


@pytest.fixture(scope="session")
def small_grid():
    """Cheap grid (about 180 cells) for compact phantoms inside the ring."""
    return Grid2D.centered(16, 1.0, radius=7.5)


@pytest.fixture(scope="session")
def compact_spec():
    return PhantomSpec(A0=0.3, centers=((0.5, -0.5),), widths=(2.0,), weights=(1.0,))


@pytest.fixture(scope="session")
def angles():
    return 2.0 * np.pi * np.arange(60) / 60


@pytest.fixture(scope="session")
def case43(k, geom, grid):
    """Two-blob phantom at A0 = 0.43 with its ring data and amplitudes."""
    v = build_phantom(PhantomSpec.two_blob(0.43), k, grid)
    bf = simulate_ring(v, geom)
    return v, bf, near_to_far(bf)


@pytest.fixture(scope="session")
def weak(k, geom, grid):
    """Two-blob phantom at A0 = 0.01."""
    v = build_phantom(PhantomSpec.two_blob(0.01), k, grid)
    bf = simulate_ring(v, geom)
    return v, bf, near_to_far(bf)
