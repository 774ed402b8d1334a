import numpy as np
import pytest

import billispec as bs


@pytest.fixture(scope="session")
def disk():
    return bs.ellipse(1.0, 1.0)


@pytest.fixture(scope="session")
def ellipse21():
    return bs.ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def spec_disk_d(disk):
    return bs.solve_spectrum(disk, "dirichlet", 12.0)


@pytest.fixture(scope="session")
def spec_disk_n(disk):
    return bs.solve_spectrum(disk, "neumann", 12.0)


@pytest.fixture(scope="session")
def spec_ell_d(ellipse21):
    # enough range for the first ~20 clusters
    return bs.solve_spectrum(ellipse21, "dirichlet", 7.2)


@pytest.fixture(scope="session")
def spec_ell_n(ellipse21):
    return bs.solve_spectrum(ellipse21, "neumann", 7.2)


@pytest.fixture(scope="session")
def spec_ell_d60(ellipse21):
    # desk-scale cutoff 60/B; shared by the trace-variation experiments
    return bs.solve_spectrum(ellipse21, "dirichlet", 60.0)


@pytest.fixture(scope="session")
def spec_disk_d25(disk):
    # 8 radial modes for the Green's-kernel truncation tests
    return bs.solve_spectrum(disk, "dirichlet", 25.0)


@pytest.fixture(scope="session")
def spec_disk_n25(disk):
    return bs.solve_spectrum(disk, "neumann", 25.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
