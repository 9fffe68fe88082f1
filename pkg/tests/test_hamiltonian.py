import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeropi.hamiltonian import (
    BasisConfig,
    DEVICE_PARAMS,
    ZeroPiParams,
    build_hamiltonian,
    classify_state,
    converge_basis,
    default_grids,
    evaluate_wavefunction,
    find_state,
    label_spectrum,
    solve,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ZeroPiParams(E_C_theta=-0.1, E_C_phi=1.0, E_J=5.0, E_L=0.4)
    with pytest.raises(ValueError):
        ZeroPiParams(E_C_theta=0.1, E_C_phi=1.0, E_J=5.0, E_L=0.4, dE_J=1.5)


def test_oscillator_relations():
    p = ZeroPiParams(E_C_theta=0.1, E_C_phi=1.0, E_J=5.0, E_L=0.25)
    assert p.omega_phi == pytest.approx(4.0 * np.sqrt(1.0 * 0.25))
    assert p.phi_zpf == pytest.approx((1.0 / 0.25) ** 0.25)


def test_hamiltonian_is_hermitian(small_basis):
    h = build_hamiltonian(DEVICE_PARAMS.replace(flux=0.23, n_g=0.17), small_basis)
    assert np.allclose(h, h.conj().T, atol=1e-12)


def test_free_rotor_plus_oscillator_limit():
    # vanishing Josephson energy decouples the modes: charge parabolas in
    # theta stacked on the harmonic phi ladder
    p = ZeroPiParams(
        E_C_theta=0.2, E_C_phi=1.0, E_J=1e-9, E_L=0.4, n_g=0.3
    )
    basis = BasisConfig(n_theta_max=8, n_phi_max=12)
    s = solve(p, basis, k=12)
    charge = 4.0 * p.E_C_theta * (basis.charge_numbers - p.n_g) ** 2
    osc = p.omega_phi * (np.arange(basis.n_phi_max + 1) + 0.5)
    exact = np.sort(np.add.outer(charge, osc).ravel())[:12]
    assert np.allclose(s.energies, exact, rtol=1e-8, atol=1e-8)


def test_solve_deterministic(small_basis):
    a = solve(DEVICE_PARAMS, small_basis, k=6)
    b = solve(DEVICE_PARAMS, small_basis, k=6)
    assert np.array_equal(a.energies, b.energies)
    assert np.array_equal(a.vectors, b.vectors)


def test_energies_sorted_and_converged():
    basis = converge_basis(DEVICE_PARAMS, k=8).basis
    s = solve(DEVICE_PARAMS, basis, k=8)
    assert np.all(np.diff(s.energies) >= -1e-12)
    bigger = BasisConfig(basis.n_theta_max + 4, basis.n_phi_max + 8)
    s2 = solve(DEVICE_PARAMS, bigger, k=8)
    assert np.allclose(s.energies, s2.energies, atol=1e-6)


def test_device_state_labels(device_spectrum):
    names = [lab.name for lab in device_spectrum.labels]
    assert names == [
        "0_s",
        "0_ptheta",
        "pi_s^+",
        "pi_s^-",
        "0_dtheta",
        "pi_ptheta^+",
        "pi_ptheta^-",
        "0_ftheta",
        "pi_dtheta^+",
        "pi_dtheta^-",
    ]


def test_find_state(device_spectrum):
    assert find_state(device_spectrum, "0_s") == 0
    assert find_state(device_spectrum, "pi_s^+") == 2
    with pytest.raises(LookupError):
        find_state(device_spectrum, "no_such_state")


def test_transition_frequency(device_spectrum):
    s = device_spectrum
    f = s.transition_frequency(0, 2)
    assert f == pytest.approx(s.energies[2] - s.energies[0])
    assert f > 0


def test_wavefunction_normalized(device_spectrum):
    theta, phi = default_grids(DEVICE_PARAMS, 81, 121)
    w = evaluate_wavefunction(device_spectrum, 0, theta, phi)
    prob = np.abs(w.values) ** 2
    norm = np.trapezoid(np.trapezoid(prob, phi, axis=1), theta)
    assert norm == pytest.approx(1.0, abs=1e-3)


def test_labels_stable_at_half_charge():
    s = label_spectrum(solve(DEVICE_PARAMS.replace(n_g=0.5), k=10))
    names = {lab.name for lab in s.labels}
    assert {"0_s", "pi_s^+", "pi_s^-"} <= names


def test_classify_ground_state_is_zero_valley(device_spectrum):
    theta, phi = default_grids(DEVICE_PARAMS, 81, 121)
    w = evaluate_wavefunction(device_spectrum, 0, theta, phi)
    lab = classify_state(w, flux=0.0, n_g=0.0)
    assert lab.valley == "zero"
    assert lab.nodes_theta == 0


def test_charge_offset_periodicity():
    # exact only in the infinite-cutoff limit: the symmetric charge window
    # is not invariant under n_g -> n_g + 1, so use a generous cutoff
    basis = BasisConfig(14, 16)
    e0 = solve(DEVICE_PARAMS.replace(n_g=0.2), basis, k=6).energies
    e1 = solve(DEVICE_PARAMS.replace(n_g=1.2), basis, k=6).energies
    assert np.allclose(e0, e1, atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(
    ec=st.floats(0.05, 0.5),
    ej=st.floats(1.0, 10.0),
    ng=st.floats(0.0, 1.0),
    flux=st.floats(0.0, 1.0),
)
def test_spectrum_real_sorted_property(ec, ej, ng, flux):
    p = ZeroPiParams(
        E_C_theta=ec, E_C_phi=1.0, E_J=ej, E_L=0.4, dE_J=0.05,
        n_g=ng, flux=flux,
    )
    s = solve(p, BasisConfig(4, 8), k=5)
    assert np.all(np.isreal(s.energies))
    assert np.all(np.diff(s.energies) >= -1e-12)
