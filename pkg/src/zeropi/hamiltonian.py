"""Two-mode 0-pi Hamiltonian: assembly, diagonalization and state labeling.

The theta mode lives in the charge basis (exactly periodic, offset charge
enters the kinetic term), the phi mode in the Fock basis of the E_L phi^2
oscillator.  The Hamiltonian

    H = 4 E_C_theta (n_theta - n_g)^2 + 4 E_C_phi n_phi^2
        + hbar g_phi_theta n_phi n_theta
        - 2 E_J cos(theta) cos(phi - pi * flux)
        + E_L phi^2
        + E_J dE_J sin(theta) sin(phi - pi * flux)

is assembled as a dense complex Hermitian matrix of dimension
(2 N + 1) * M.  All energies are frequencies in GHz.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class DimensionError(ValueError):
    """Requested basis exceeds the configured dimension ceiling."""


@dataclass(frozen=True)
class ZeroPiParams:
    """All symbols of the two-mode Hamiltonian (GHz, dimensionless)."""

    E_C_theta: float
    E_C_phi: float
    E_J: float
    E_L: float
    dE_J: float = 0.0
    g_phi_theta: float = 0.0
    n_g: float = 0.0
    flux: float = 0.0
    beta_phi: float = 0.0
    beta_theta: float = 0.0

    def __post_init__(self):
        if min(self.E_C_theta, self.E_C_phi, self.E_J, self.E_L) <= 0:
            raise ValueError("E_C_theta, E_C_phi, E_J, E_L must be positive")
        if abs(self.dE_J) >= 1:
            raise ValueError("|dE_J| must be < 1")

    @property
    def omega_phi(self) -> float:
        """Harmonic frequency of the phi oscillator (GHz), potential E_L phi^2."""
        return 4.0 * np.sqrt(self.E_C_phi * self.E_L)

    @property
    def phi_zpf(self) -> float:
        """Zero-point length of the phi oscillator."""
        return (self.E_C_phi / self.E_L) ** 0.25

    def replace(self, **kw) -> "ZeroPiParams":
        return dataclasses.replace(self, **kw)


#: Multivariate-fit parameters of the measured device (GHz).
DEVICE_PARAMS = ZeroPiParams(
    E_C_phi=1.142,
    E_C_theta=0.092,
    E_J=6.013,
    E_L=0.377,
    dE_J=0.1,
    beta_phi=0.27,
    beta_theta=6.6e-3,
)


@dataclass(frozen=True)
class BasisConfig:
    """Charge cutoff N (theta states n in [-N, N]) and Fock cutoff M."""

    n_theta_max: int = 10
    n_phi_max: int = 40

    def __post_init__(self):
        if self.n_theta_max < 1:
            raise ValueError("n_theta_max must be >= 1")
        if self.n_phi_max < 2:
            raise ValueError("n_phi_max must be >= 2")

    @property
    def dim(self) -> int:
        return (2 * self.n_theta_max + 1) * self.n_phi_max

    @property
    def charge_numbers(self) -> np.ndarray:
        return np.arange(-self.n_theta_max, self.n_theta_max + 1)


DIM_CEILING = 20_000


@dataclass(frozen=True)
class StateLabel:
    valley: str  # "zero", "pi" or "mixed"
    nodes_theta: int
    nodes_phi: int
    phi_parity: str  # "+", "-" or "none"

    _LETTERS = "spdfghij"

    @property
    def name(self) -> str:
        if self.valley == "mixed":
            return "mixed"
        total = self.nodes_theta + self.nodes_phi
        letter = self._LETTERS[total] if total < len(self._LETTERS) else str(total)
        orient = ""
        if total > 0:
            if self.nodes_phi == 0:
                orient = "theta"
            elif self.nodes_theta == 0:
                orient = "phi"
            else:
                orient = "thetaphi"
        prefix = "0" if self.valley == "zero" else "pi"
        name = f"{prefix}_{letter}{orient}"
        if self.valley == "pi" and self.phi_parity in "+-":
            name += f"^{self.phi_parity}"
        return name


@dataclass
class Spectrum:
    """Lowest-k eigenpairs of the two-mode Hamiltonian."""

    energies: np.ndarray  # ascending, GHz
    vectors: np.ndarray  # columns, orthonormal
    params: ZeroPiParams
    basis: BasisConfig
    labels: list[StateLabel] | None = field(default=None)

    @property
    def k(self) -> int:
        return len(self.energies)

    def transition_frequency(self, i: int, j: int) -> float:
        return self.energies[j] - self.energies[i]


@dataclass
class Wavefunction2D:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # complex, shape (len(theta), len(phi))

    def probability(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        dth = self.theta[1] - self.theta[0]
        return float(np.trapezoid(self.probability().sum(axis=0) * dth, self.phi))


# ---------------------------------------------------------------------------
# operator assembly


def _phi_quadrature_ops(p: ZeroPiParams, m: int):
    """phi, cos(phi - pi*flux), sin(phi - pi*flux) and n_phi in the Fock basis.

    cos/sin are built as matrix functions of the position quadrature:
    exact within the truncated space, no Taylor divergence.
    """
    a = np.diag(np.sqrt(np.arange(1, m)), 1)
    z = p.phi_zpf
    phi_op = z * (a + a.T)
    n_op = 1j / (2.0 * z) * (a.T - a)
    vals, vecs = np.linalg.eigh(phi_op)
    shift = vals - np.pi * p.flux
    cos_op = (vecs * np.cos(shift)) @ vecs.T
    sin_op = (vecs * np.sin(shift)) @ vecs.T
    return phi_op, cos_op, sin_op, n_op


def _theta_charge_ops(b: BasisConfig):
    """cos(theta) and sin(theta) as charge-shift operators."""
    d = 2 * b.n_theta_max + 1
    raise_op = np.eye(d, k=-1)  # e^{i theta} |n> = |n+1>
    cos_op = 0.5 * (raise_op + raise_op.T)
    sin_op = (raise_op - raise_op.T) / 2j
    return cos_op, sin_op


def n_theta_operator(b: BasisConfig) -> np.ndarray:
    """Charge operator n_theta in the full product basis."""
    m = b.n_phi_max
    return np.kron(np.diag(b.charge_numbers.astype(float)), np.eye(m))


def n_phi_operator(p: ZeroPiParams, b: BasisConfig) -> np.ndarray:
    """Charge operator n_phi in the full product basis."""
    a = np.diag(np.sqrt(np.arange(1, b.n_phi_max)), 1)
    n_op = 1j / (2.0 * p.phi_zpf) * (a.T - a)
    return np.kron(np.eye(2 * b.n_theta_max + 1), n_op)


def build_hamiltonian(p: ZeroPiParams, b: BasisConfig) -> np.ndarray:
    """Dense complex Hermitian matrix of dimension (2N+1)*M."""
    if b.dim > DIM_CEILING:
        raise DimensionError(f"basis dimension {b.dim} exceeds ceiling {DIM_CEILING}")
    n = b.charge_numbers
    m = b.n_phi_max
    d_theta = len(n)

    kin_theta = 4.0 * p.E_C_theta * (n - p.n_g) ** 2
    cos_t, sin_t = _theta_charge_ops(b)
    _, cos_p, sin_p, n_phi = _phi_quadrature_ops(p, m)
    # 4 E_C_phi n^2 + E_L phi^2 == omega_phi (a^dag a + 1/2)
    h_osc = np.diag(p.omega_phi * (np.arange(m) + 0.5))

    eye_m = np.eye(m)
    eye_t = np.eye(d_theta)
    h = np.kron(np.diag(kin_theta), eye_m) + np.kron(eye_t, h_osc)
    h = h - 2.0 * p.E_J * np.kron(cos_t, cos_p)
    if p.dE_J != 0.0:
        h = h + (p.E_J * p.dE_J) * np.kron(sin_t.astype(complex), sin_p)
    if p.g_phi_theta != 0.0:
        h = h + p.g_phi_theta * np.kron(np.diag(n.astype(float)), n_phi)
    return np.asarray(h, dtype=complex)


def diagonalize(h: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest k eigenpairs of a Hermitian matrix, ascending."""
    dim = h.shape[0]
    if k > dim:
        raise ValueError(f"requested {k} eigenpairs from dimension {dim}")
    vals, vecs = sla.eigh(h, subset_by_index=[0, k - 1])
    return vals, vecs


def solve(p: ZeroPiParams, basis: BasisConfig | None = None, k: int = 12) -> Spectrum:
    """Build and diagonalize; convenience wrapper used throughout."""
    b = basis if basis is not None else BasisConfig()
    h = build_hamiltonian(p, b)
    vals, vecs = diagonalize(h, k)
    return Spectrum(energies=vals, vectors=vecs, params=p, basis=b)


@dataclass
class ConvergenceReport:
    basis: BasisConfig
    achieved_tol: float
    converged: bool


def converge_basis(
    p: ZeroPiParams,
    tol: float = 1e-6,
    k: int = 12,
    start: BasisConfig | None = None,
    max_rounds: int = 6,
) -> ConvergenceReport:
    """Smallest cutoffs on a doubling schedule whose k lowest levels shift
    by less than ``tol`` (relative) when both cutoffs are doubled."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = start if start is not None else BasisConfig(3, max(6, k + 2))
    prev = solve(p, b, k).energies
    best = np.inf
    for _ in range(max_rounds):
        nxt = BasisConfig(2 * b.n_theta_max, 2 * b.n_phi_max)
        if nxt.dim > DIM_CEILING:
            break
        cur = solve(p, nxt, k).energies
        scale = max(np.abs(cur).max(), 1e-12)
        best = np.abs(cur - prev).max() / scale
        if best < tol:
            return ConvergenceReport(basis=b, achieved_tol=best, converged=True)
        b, prev = nxt, cur
    return ConvergenceReport(basis=b, achieved_tol=best, converged=False)


# ---------------------------------------------------------------------------
# real-space wavefunctions and labeling


def _hermite_functions(x: np.ndarray, m: int) -> np.ndarray:
    """First m normalized Hermite functions h_k(x), stable recurrence."""
    out = np.empty((m, len(x)))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if m > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(2, m):
        out[k] = np.sqrt(2.0 / k) * x * out[k - 1] - np.sqrt((k - 1) / k) * out[k - 2]
    return out


def evaluate_wavefunction(
    s: Spectrum, index: int, theta_grid: np.ndarray, phi_grid: np.ndarray
) -> Wavefunction2D:
    """psi(theta, phi) for one eigenstate on a rectangular grid."""
    if index >= s.k:
        raise ValueError(f"state index {index} out of range (k={s.k})")
    theta_grid = np.asarray(theta_grid, dtype=float)
    phi_grid = np.asarray(phi_grid, dtype=float)
    if theta_grid.size == 0 or phi_grid.size == 0:
        raise ValueError("grids must be non-empty")

    b, p = s.basis, s.params
    coeff = s.vectors[:, index].reshape(len(b.charge_numbers), b.n_phi_max)
    # theta part: plane waves e^{i n theta} / sqrt(2 pi)
    plane = np.exp(1j * np.outer(b.charge_numbers, theta_grid)) / np.sqrt(2 * np.pi)
    # phi part: oscillator eigenfunctions with length sqrt(2) * phi_zpf
    ell = np.sqrt(2.0) * p.phi_zpf
    herm = _hermite_functions(phi_grid / ell, b.n_phi_max) / np.sqrt(ell)
    values = plane.T @ coeff @ herm
    return Wavefunction2D(theta=theta_grid, phi=phi_grid, values=values)


def _count_sign_changes(profile: np.ndarray, significance: float = 0.05) -> int:
    amax = np.abs(profile).max()
    if amax == 0:
        return 0
    kept = profile[np.abs(profile) > significance * amax]
    if kept.size < 2:
        return 0
    return int(np.count_nonzero(np.sign(kept[1:]) != np.sign(kept[:-1])))


def classify_state(w: Wavefunction2D, flux: float, n_g: float = 0.0) -> StateLabel:
    """Valley / node-count / phi-parity label from the real-space density."""
    prob = w.probability()
    dth = w.theta[1] - w.theta[0]
    weights = np.trapezoid(prob, w.phi, axis=1) * dth
    total = weights.sum()
    theta_mod = np.mod(w.theta, 2 * np.pi)
    in_pi = (theta_mod > np.pi / 2) & (theta_mod < 3 * np.pi / 2)
    w_pi = weights[in_pi].sum() / total
    if w_pi > 0.75:
        valley = "pi"
    elif w_pi < 0.25:
        valley = "zero"
    else:
        valley = "mixed"

    # phi parity needs a reflection-symmetric grid and flux on a symmetry point
    parity = "none"
    at_symmetry = min(abs(flux % 1.0), abs(flux % 1.0 - 0.5), abs(flux % 1.0 - 1.0)) < 1e-9
    if at_symmetry and np.allclose(w.phi, -w.phi[::-1], atol=1e-12):
        mirrored = w.values[:, ::-1]
        dphi = w.phi[1] - w.phi[0]
        overlap = np.vdot(mirrored, w.values) * dth * dphi
        if abs(overlap) > 0.9 * total:
            parity = "+" if overlap.real > 0 else "-"

    # Strip the e^{i n_g theta} Bloch phase (eigenfunctions are complex at
    # generic offset charge), then fix the global phase at the maximum.
    stripped = w.values * np.exp(-1j * n_g * w.theta)[:, None]
    flat = np.argmax(np.abs(stripped))
    phase = stripped.flat[flat] / abs(stripped.flat[flat])
    real = (stripped / phase).real

    center = 0.0 if valley == "zero" else np.pi
    dist = np.abs((np.mod(w.theta - center + np.pi, 2 * np.pi)) - np.pi)
    th_window = dist < 0.45 * np.pi

    i_theta_max, i_phi_max = np.unravel_index(flat, w.values.shape)
    nodes_theta = _count_sign_changes(real[th_window, i_phi_max], significance=0.1)

    col = real[i_theta_max, :]
    if valley == "pi":
        # count within one phi well only; the mirror is described by parity
        col = col[np.sign(w.phi) == np.sign(w.phi[i_phi_max])]
    nodes_phi = _count_sign_changes(col, significance=0.1)

    return StateLabel(
        valley=valley, nodes_theta=nodes_theta, nodes_phi=nodes_phi, phi_parity=parity
    )


def default_grids(p: ZeroPiParams, n_theta: int = 81, n_phi: int = 121):
    theta = np.linspace(-np.pi / 2, 3 * np.pi / 2, n_theta, endpoint=False)
    span = np.pi + 3.5 * p.phi_zpf
    phi = np.linspace(-span, span, n_phi)
    return theta, phi


def label_spectrum(s: Spectrum, n_theta: int = 81, n_phi: int = 121) -> Spectrum:
    """Attach a StateLabel to every retained eigenstate (in place)."""
    theta, phi = default_grids(s.params, n_theta, n_phi)
    s.labels = [
        classify_state(
            evaluate_wavefunction(s, i, theta, phi), s.params.flux, s.params.n_g
        )
        for i in range(s.k)
    ]
    return s


def find_state(s: Spectrum, name: str) -> int:
    """Index of the eigenstate whose label name matches, e.g. ``pi_dtheta^-``."""
    if s.labels is None:
        label_spectrum(s)
    for i, lab in enumerate(s.labels):
        if lab.name == name:
            return i
    raise LookupError(f"no state labeled {name!r} among the lowest {s.k}")
