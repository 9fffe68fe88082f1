"""Circuit quantization of the four-node 0-pi capacitance network.

Maps the physical capacitance graph (shunt capacitors, junction
capacitances, cross-capacitances and the couplings of each node to the
resonator centerpin and ground) to the charging energies, mode-mode
coupling and drive couplings of the phi/theta/zeta normal modes.

Units: capacitances in fF, energies as frequencies in GHz (E/h).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# e^2 / (2 * 1 fF) / h in GHz; single conversion constant between
# inverse capacitance (1/fF) and charging energy (GHz).
E2_OVER_2C_GHZ_FF = 19.3702293

# Mode rotation (phi, theta, zeta, Sigma) = R . (node phases).  Rows are
# orthonormal, so R^-1 = R^T.
MODE_ROTATION = 0.5 * np.array(
    [
        [-1.0, 1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, 1.0, 1.0, 1.0],
    ]
)

PHI, THETA, ZETA, SIGMA = 0, 1, 2, 3


class CircuitError(ValueError):
    """Invalid capacitance network or non-physical derived matrix."""


@dataclass(frozen=True)
class CapacitanceNetwork:
    """Four-node capacitance graph plus junction/inductor energies.

    Node pairing convention: junctions (with ``C_J`` and ``C_J_x``) sit
    between nodes 1-2 and 3-4, the large shunt capacitors ``C`` between
    1-3 and 2-4, and the superinductors (spanned by ``C_L_x``) between
    1-4 and 2-3.
    """

    C: float
    C_J: float
    E_J: float
    E_L: float
    C_L_x: float = 0.0
    C_J_x: float = 0.0
    C_r: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    C_0: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    dE_J: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "C_r", tuple(float(c) for c in self.C_r))
        object.__setattr__(self, "C_0", tuple(float(c) for c in self.C_0))
        if len(self.C_r) != 4 or len(self.C_0) != 4:
            raise CircuitError("C_r and C_0 must each list four node capacitances")
        caps = (self.C, self.C_J, self.C_L_x, self.C_J_x, *self.C_r, *self.C_0)
        if any(c < 0 for c in caps):
            raise CircuitError("capacitances must be non-negative")
        if self.C <= 0 or self.C_J <= 0:
            raise CircuitError("C and C_J must be positive")
        if self.E_J <= 0 or self.E_L <= 0:
            raise CircuitError("E_J and E_L must be positive")
        if abs(self.dE_J) >= 1:
            raise CircuitError("junction asymmetry |dE_J| must be < 1")

    def scaled(self, factor: float) -> "CapacitanceNetwork":
        """Return a copy with every capacitance multiplied by ``factor``."""
        return CapacitanceNetwork(
            C=self.C * factor,
            C_J=self.C_J * factor,
            E_J=self.E_J,
            E_L=self.E_L,
            C_L_x=self.C_L_x * factor,
            C_J_x=self.C_J_x * factor,
            C_r=tuple(c * factor for c in self.C_r),
            C_0=tuple(c * factor for c in self.C_0),
            dE_J=self.dE_J,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "CapacitanceNetwork":
        required = {"C", "C_J", "E_J", "E_L"}
        missing = sorted(required - d.keys())
        if missing:
            raise CircuitError(f"missing network fields: {', '.join(missing)}")
        known = required | {"C_L_x", "C_J_x", "C_r", "C_0", "dE_J"}
        unknown = sorted(d.keys() - known)
        if unknown:
            raise CircuitError(f"unknown network fields: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "CapacitanceNetwork":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ModeEnergies:
    """Mode-basis energies and couplings, all as frequencies in GHz."""

    E_C_theta: float
    E_C_phi: float
    E_C_zeta: float
    g_phi_theta: float
    omega_zeta: float  # harmonic-mode frequency omega/2pi
    beta_phi: float
    beta_theta: float


def build_capacitance_matrix(net: CapacitanceNetwork) -> np.ndarray:
    """Assemble the 4x4 node-basis capacitance matrix (fF).

    Diagonals hold the total capacitance attached to each node;
    off-diagonals the negated branch capacitances.  Raises if the result
    is not positive definite (a network with no path to ground).
    """
    m = np.zeros((4, 4))

    def branch(i, j, c):
        m[i, i] += c
        m[j, j] += c
        m[i, j] -= c
        m[j, i] -= c

    cj = net.C_J + net.C_J_x
    branch(0, 1, cj)
    branch(2, 3, cj)
    branch(0, 2, net.C)
    branch(1, 3, net.C)
    branch(0, 3, net.C_L_x)
    branch(1, 2, net.C_L_x)
    for i in range(4):
        m[i, i] += net.C_r[i] + net.C_0[i]

    eigs = np.linalg.eigvalsh(m)
    if eigs.min() <= 1e-12 * eigs.max():
        raise CircuitError("node capacitance matrix is not positive definite")
    return m


def to_mode_basis(
    c_phi: np.ndarray, c_r: tuple[float, float, float, float] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate the node capacitance matrix and the gate-capacitance matrix
    into the (phi, theta, zeta, Sigma) mode basis."""
    c_phi = np.asarray(c_phi, dtype=float)
    if c_phi.shape != (4, 4):
        raise CircuitError("node capacitance matrix must be 4x4")
    if np.linalg.eigvalsh(c_phi).min() <= 0:
        raise CircuitError("node capacitance matrix is not positive definite")
    r = MODE_ROTATION
    c_theta = r @ c_phi @ r.T
    c_r_tilde = r @ np.diag(np.asarray(c_r, dtype=float)) @ r.T
    return c_theta, c_r_tilde


def derive_mode_energies(
    c_theta: np.ndarray, c_r_tilde: np.ndarray, E_L: float
) -> ModeEnergies:
    """Charging energies, mode coupling and drive couplings from the
    mode-basis capacitance matrices.

    The kinetic term per mode is 4 E_C^m n_m^2 with E_C^m read from the
    inverse capacitance matrix.  The zeta mode is harmonic with potential
    E_L zeta^2, so omega_zeta/2pi = 4 sqrt(E_C_zeta E_L).  The drive
    couplings beta contract the phi/theta rows of C_Theta^-1 C_r with the
    voltage-drive vector, which has weight 2 on the Sigma entry only.
    """
    try:
        cinv = np.linalg.inv(np.asarray(c_theta, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise CircuitError("mode capacitance matrix is singular") from exc
    if np.diag(cinv).min() <= 0:
        raise CircuitError("mode capacitance matrix is not positive definite")

    kappa = E2_OVER_2C_GHZ_FF
    e_c = kappa * np.diag(cinv)
    # hbar*g n_phi n_theta with hbar*g/h = 8 kappa (C_Theta^-1)_{phi,theta}
    g_phi_theta = 8.0 * kappa * cinv[PHI, THETA]
    omega_zeta = 4.0 * np.sqrt(e_c[ZETA] * E_L)

    drive = cinv @ np.asarray(c_r_tilde, dtype=float)
    beta_phi = 2.0 * drive[PHI, SIGMA]
    beta_theta = 2.0 * drive[THETA, SIGMA]

    return ModeEnergies(
        E_C_theta=e_c[THETA],
        E_C_phi=e_c[PHI],
        E_C_zeta=e_c[ZETA],
        g_phi_theta=g_phi_theta,
        omega_zeta=omega_zeta,
        beta_phi=beta_phi,
        beta_theta=beta_theta,
    )


def quantize(net: CapacitanceNetwork) -> ModeEnergies:
    """Full quantization chain: network -> node matrix -> mode energies."""
    c_phi = build_capacitance_matrix(net)
    c_theta, c_r_tilde = to_mode_basis(c_phi, net.C_r)
    return derive_mode_energies(c_theta, c_r_tilde, net.E_L)
