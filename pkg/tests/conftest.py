import numpy as np
import pytest

from zeropi.hamiltonian import BasisConfig, DEVICE_PARAMS, label_spectrum, solve


@pytest.fixture(scope="session")
def device_spectrum():
    """Labeled 10-state spectrum at the fitted device parameters, flux 0,
    n_g 0."""
    return label_spectrum(solve(DEVICE_PARAMS, k=10))


@pytest.fixture(scope="session")
def transmon_params():
    """Deep transmon-limit parameters for the theta mode (E_J/E_C_theta =
    50), with symmetric junctions and no mode coupling."""
    from zeropi.hamiltonian import ZeroPiParams

    return ZeroPiParams(
        E_C_theta=0.1,
        E_C_phi=1.0,
        E_J=5.0,
        E_L=0.4,
        dE_J=0.0,
        g_phi_theta=0.0,
    )


@pytest.fixture(scope="session")
def ng_grid_16():
    return np.linspace(0.0, 1.0, 16, endpoint=False)


@pytest.fixture(scope="session")
def small_basis():
    return BasisConfig(n_theta_max=6, n_phi_max=16)
