import numpy as np
import pytest

from zeropi.hamiltonian import BasisConfig, DEVICE_PARAMS
from zeropi.tightbinding import (
    TightBindingError,
    band_dispersion,
    bloch_states,
    bloch_wavefunction,
    eta_coefficients,
    hopping_integral,
    participation_width,
    reconstruct_bloch,
    recenter_valley,
    shift_cells,
    shift_theta,
    tb_matrix_element,
    verify_tb_against_exact,
    wannier_band_parameters,
    wannier_function,
)

# the nHz-scale transmon-limit hoppings only converge with generous cutoffs
TB_BASIS = BasisConfig(n_theta_max=12, n_phi_max=28)


@pytest.fixture(scope="module")
def transmon_family(transmon_params):
    ng = np.linspace(0.0, 1.0, 32, endpoint=False)
    return bloch_states(transmon_params, 0, ng, TB_BASIS)


@pytest.fixture(scope="module")
def transmon_wannier(transmon_family):
    return wannier_function(transmon_family)


def test_bloch_grid_validation(transmon_params):
    with pytest.raises(ValueError):
        bloch_states(transmon_params, 0, np.linspace(0, 1, 8, endpoint=False))
    with pytest.raises(ValueError):
        bloch_states(transmon_params, 0, np.linspace(0.0, 2.0, 32))


def test_bloch_family_smooth_gauge(transmon_family):
    # parallel transport: consecutive periodic parts overlap near unity
    v = transmon_family.vectors
    overlaps = np.abs(np.sum(v[:, :-1].conj() * v[:, 1:], axis=0))
    assert overlaps.min() > 0.99
    assert transmon_family.min_overlap > 0.99


def test_wannier_is_real_and_normalized(transmon_params):
    # reality to 1e-6 needs the charge cutoff slightly above the default
    ng = np.linspace(0.0, 1.0, 32, endpoint=False)
    fam = bloch_states(transmon_params, 0, ng, BasisConfig(12, 20))
    w = wannier_function(fam)
    imag_ratio = np.abs(w.values.imag).max() / np.abs(w.values).max()
    assert imag_ratio < 1e-6
    assert w.norm() == pytest.approx(1.0, abs=1e-6)


def test_wannier_orthonormality(transmon_wannier):
    w = transmon_wannier
    dth = w.theta[1] - w.theta[0]
    dph = w.phi[1] - w.phi[0]
    neighbor = shift_cells(w, 1).values
    overlap = np.sum(np.conj(neighbor) * w.values) * dth * dph
    assert abs(overlap) < 1e-4
    norm = np.sum(np.abs(w.values) ** 2) * dth * dph
    assert norm == pytest.approx(1.0, abs=1e-4)


def test_wannier_localized(transmon_wannier):
    # deep transmon band: tail outside the 3 central cells below 1e-3
    w = transmon_wannier
    dth = w.theta[1] - w.theta[0]
    dph = w.phi[1] - w.phi[0]
    outside = np.abs(w.theta) > 3 * np.pi
    tail = np.sum(np.abs(w.values[outside]) ** 2) * dth * dph
    assert tail < 1e-3


def test_wannier_gaussian_overlap(transmon_params, transmon_wannier):
    # deep-well ground orbital is close to the harmonic ground state of
    # the well curvature
    w = transmon_wannier
    rho = w.theta_marginal()
    dth = w.theta[1] - w.theta[0]
    psi = np.sqrt(rho / (rho.sum() * dth))
    width = (transmon_params.E_C_theta / transmon_params.E_J) ** 0.25
    gauss = np.exp(-w.theta**2 / (2 * width**2))
    gauss /= np.sqrt(np.sum(gauss**2) * dth)
    assert np.sum(psi * gauss) * dth > 0.95


def test_inverse_transform_fidelity(transmon_family, transmon_wannier):
    # resumming the Wannier copies with Bloch phases recovers the Bloch
    # state at every grid point
    f, w = transmon_family, transmon_wannier
    dth = w.theta[1] - w.theta[0]
    dph = w.phi[1] - w.phi[0]
    for i in (0, 7, 16):
        target = bloch_wavefunction(f, i, w.theta, w.phi)
        rebuilt = reconstruct_bloch(w, f.ng_grid[i])
        num = abs(np.sum(np.conj(rebuilt) * target)) * dth * dph
        den = np.sqrt(
            np.sum(np.abs(rebuilt) ** 2) * np.sum(np.abs(target) ** 2)
        ) * dth * dph
        assert num / den > 0.999


def test_grid_refinement_agrees(transmon_params, transmon_wannier):
    # 16-point and 32-point n_g grids give the same orbital physics
    ng16 = np.linspace(0.0, 1.0, 16, endpoint=False)
    fam16 = bloch_states(transmon_params, 0, ng16, TB_BASIS)
    w16 = wannier_function(fam16)
    e16, t16 = wannier_band_parameters(w16, transmon_params)
    e32, t32 = wannier_band_parameters(transmon_wannier, transmon_params)
    assert e16 == pytest.approx(e32, rel=1e-3)
    assert t16 == pytest.approx(t32, rel=1e-3)


def test_hopping_wannier_vs_dispersion(transmon_params, transmon_wannier):
    ng = np.linspace(0.0, 1.0, 32, endpoint=False)
    eps = band_dispersion(transmon_params, 0, ng, TB_BASIS)
    t_disp = hopping_integral(transmon_params, 0, TB_BASIS)
    eps0_w, t_w = wannier_band_parameters(transmon_wannier, transmon_params)
    assert abs(t_w - t_disp) < 0.1 * abs(t_disp)
    assert eps0_w == pytest.approx(np.mean(eps), abs=5e-3)


def test_dispersion_is_cosine(transmon_params):
    ng = np.linspace(0.0, 1.0, 16, endpoint=False)
    eps = band_dispersion(transmon_params, 0, ng, TB_BASIS)
    t = hopping_integral(transmon_params, 0, TB_BASIS)
    model = np.mean(eps) + 2 * t * (
        np.cos(2 * np.pi * ng) - np.mean(np.cos(2 * np.pi * ng))
    )
    assert np.abs(eps - model).max() < 0.05 * np.ptp(eps)


def test_shift_theta_requires_grid_multiple(transmon_wannier):
    with pytest.raises(ValueError):
        shift_theta(transmon_wannier, 0.12345)


def test_participation_width_positive(transmon_wannier):
    width = participation_width(transmon_wannier)
    assert 0 < width < 2 * np.pi


def test_eta_hierarchy_and_symmetry(transmon_wannier):
    # same-orbital plasmon pair: unit self-overlap, small symmetric
    # neighbor overlaps
    etas = eta_coefficients(transmon_wannier, transmon_wannier)
    assert etas.eta0_C.real == pytest.approx(1.0, abs=1e-4)
    assert abs(etas.eta0_L) < 0.2
    assert abs(etas.eta0_L - etas.eta0_R) < 1e-6
    # i d/dtheta on a real orbital has zero diagonal expectation
    assert abs(etas.eta1_C) < 1e-6


def test_tb_matrix_element_parity_gates():
    ng = np.linspace(0.0, 1.0, 9)
    # theta operator between opposite phi parities is forbidden
    forbidden = tb_matrix_element(None, ng, True, False, "fluxon", "d_theta")
    assert np.all(forbidden == 0.0)
    # phi operator between equal phi parities is forbidden
    forbidden = tb_matrix_element(None, ng, True, True, "fluxon", "d_phi")
    assert np.all(forbidden == 0.0)


def test_tb_matrix_element_normalized_forms():
    val = tb_matrix_element(None, 0.25, True, True, "fluxon", "d_theta")
    assert val == pytest.approx(np.sqrt(2) / 2)
    val = tb_matrix_element(None, 0.25, False, True, "fluxon", "d_theta")
    assert val == pytest.approx(np.sqrt(2) / 2)
    val = tb_matrix_element(None, 0.5, True, True, "fluxon", "d_theta")
    assert val == pytest.approx(1.0)
    val = tb_matrix_element(
        None, 0.5, True, False, "plasmon", "d_phi", epsilon=0.3
    )
    assert val == pytest.approx(0.7)
    with pytest.raises(ValueError):
        tb_matrix_element(None, 0.1, True, True, "bogus", "d_theta")


def test_fluxon_interference_matches_exact():
    # the phi charge element of the excited-plasmon fluxon pair follows
    # the two-path |cos pi n_g| law with a zero at half charge
    ng = np.linspace(0.0, 1.0, 20, endpoint=False)
    cmp = verify_tb_against_exact(
        DEVICE_PARAMS, 1, 6, ng, operator="n_phi", transition_kind="fluxon",
        theta_parity_same=True, phi_parity_same=False, k=10,
    )
    assert cmp.nrms_residual < 0.01
    at_half = cmp.exact[np.argmin(np.abs(ng - 0.5))]
    assert at_half < 1e-3 * cmp.exact.max()


def test_recenter_valley_idempotent(transmon_wannier):
    w = recenter_valley(transmon_wannier)
    w2 = recenter_valley(w)
    assert np.allclose(w.values, w2.values)
