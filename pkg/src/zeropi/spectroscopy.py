"""Transition tables, flux/charge sweeps, matrix elements and dressed spectra.

Builds on the eigensolver: dipole matrix elements of the two charge
operators, quasiparticle parity branches (offset charge shifted by 1/2),
qubit-resonator dressed spectra with sidebands, and the dressed-state
dispersion measured in two-tone pump-probe spectroscopy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const
import scipy.optimize as opt
from scipy.optimize import linear_sum_assignment

from .hamiltonian import (
    BasisConfig,
    Spectrum,
    StateLabel,
    ZeroPiParams,
    label_spectrum,
    n_phi_operator,
    n_theta_operator,
    solve,
)


@dataclass(frozen=True)
class Transition:
    i: int
    j: int
    frequency: float  # GHz
    me_theta: complex
    me_phi: complex
    from_label: StateLabel | None = None
    to_label: StateLabel | None = None

    def drive_weight(self, beta_phi: float, beta_theta: float) -> float:
        return abs(beta_phi * self.me_phi + beta_theta * self.me_theta)


@dataclass(frozen=True)
class ResonatorParams:
    f_r: float = 7.35  # GHz
    Z_r: float = 50.0  # Ohm
    n_photon_max: int = 2

    def __post_init__(self):
        if self.f_r <= 0 or self.Z_r <= 0:
            raise ValueError("resonator frequency and impedance must be positive")

    @property
    def v_rms(self) -> float:
        """Root-mean-square voltage of the half-wave resonator mode (V)."""
        return np.sqrt(2.0 * const.h * (self.f_r * 1e9) ** 2 * self.Z_r)

    @property
    def coupling_ghz(self) -> float:
        """2 e V_rms / h in GHz; multiply by beta and a matrix element."""
        return 2.0 * const.e * self.v_rms / const.h / 1e9


@dataclass
class SweepResult:
    axis: str  # "flux" or "charge"
    values: np.ndarray
    branches: dict  # branch tag -> list (per point) of list[Transition]
    energies: dict  # branch tag -> array (n_points, k), tracked ordering
    params: ZeroPiParams
    initial_indices: tuple


def eigenbasis_operator(s: Spectrum, operator: str) -> np.ndarray:
    """n_theta or n_phi projected onto the retained eigenstates."""
    if operator == "n_theta":
        op = n_theta_operator(s.basis)
    elif operator == "n_phi":
        op = n_phi_operator(s.params, s.basis)
    else:
        raise ValueError(f"unknown operator {operator!r}")
    return s.vectors.conj().T @ op @ s.vectors


def charge_matrix_element(
    p: ZeroPiParams | Spectrum,
    i: int,
    j: int,
    operator: str = "n_theta",
    k: int = 12,
    basis: BasisConfig | None = None,
) -> complex:
    """<i| n_hat |j> in the eigenbasis."""
    s = p if isinstance(p, Spectrum) else solve(p, basis, k)
    if max(i, j) >= s.k:
        raise ValueError("state index out of range")
    return complex(eigenbasis_operator(s, operator)[i, j])


def transition_table(
    p: ZeroPiParams | Spectrum,
    initial_indices=(0,),
    k: int = 12,
    basis: BasisConfig | None = None,
    with_labels: bool = False,
) -> list[Transition]:
    """All upward transitions from each listed initial state."""
    s = p if isinstance(p, Spectrum) else solve(p, basis, k)
    if max(initial_indices) >= s.k:
        raise ValueError("initial state index out of range")
    if with_labels and s.labels is None:
        label_spectrum(s)
    n_t = eigenbasis_operator(s, "n_theta")
    n_p = eigenbasis_operator(s, "n_phi")
    out = []
    for i in sorted(set(initial_indices)):
        for j in range(i + 1, s.k):
            out.append(
                Transition(
                    i=i,
                    j=j,
                    frequency=s.energies[j] - s.energies[i],
                    me_theta=complex(n_t[i, j]),
                    me_phi=complex(n_p[i, j]),
                    from_label=s.labels[i] if s.labels else None,
                    to_label=s.labels[j] if s.labels else None,
                )
            )
    return out


def _track_order(prev_vectors: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Column permutation maximizing overlap with the previous point's states."""
    overlap = np.abs(prev_vectors.conj().T @ vectors)
    rows, cols = linear_sum_assignment(-overlap)
    order = np.empty(len(rows), dtype=int)
    order[rows] = cols
    return order


def sweep(
    p: ZeroPiParams,
    axis: str,
    grid,
    parity_branches: bool = False,
    k: int = 12,
    basis: BasisConfig | None = None,
    initial_indices=(0,),
    track: bool = True,
) -> SweepResult:
    """Transition tables along a flux or offset-charge grid.

    With ``parity_branches`` every point is evaluated at n_g and n_g + 1/2
    (single-electron quasiparticle shifts the 2e-unit offset charge by 1/2).
    Eigenstates are tracked across the sweep by maximum eigenvector
    overlap so that labels survive avoided crossings.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("sweep grid must be non-empty")
    if axis not in ("flux", "charge"):
        raise ValueError("axis must be 'flux' or 'charge'")

    branch_offsets = {"even": 0.0}
    if parity_branches:
        branch_offsets["odd"] = 0.5

    branches = {}
    energies = {}
    for tag, dng in branch_offsets.items():
        tables = []
        evs = np.empty((len(grid), k))
        prev = None
        for idx, x in enumerate(grid):
            if axis == "flux":
                q = p.replace(flux=x, n_g=p.n_g + dng)
            else:
                q = p.replace(n_g=x + dng)
            s = solve(q, basis, k)
            if track and prev is not None:
                order = _track_order(prev, s.vectors)
                s = Spectrum(
                    energies=s.energies[order],
                    vectors=s.vectors[:, order],
                    params=s.params,
                    basis=s.basis,
                )
            prev = s.vectors
            evs[idx] = s.energies
            tables.append(transition_table(s, initial_indices=initial_indices, k=k))
        branches[tag] = tables
        energies[tag] = evs
    return SweepResult(
        axis=axis,
        values=grid,
        branches=branches,
        energies=energies,
        params=p,
        initial_indices=tuple(initial_indices),
    )


def matrix_element_sweep(
    p: ZeroPiParams,
    i: int,
    j: int,
    ng_grid,
    operator: str = "n_theta",
    k: int = 12,
    basis: BasisConfig | None = None,
) -> np.ndarray:
    """|<i| n_hat |j>| over an offset-charge grid with eigenstate tracking.

    State indices refer to the ordering at the first grid point.
    """
    ng_grid = np.asarray(ng_grid, dtype=float)
    out = np.empty(len(ng_grid))
    prev = None
    for idx, ng in enumerate(ng_grid):
        s = solve(p.replace(n_g=ng), basis, k)
        if prev is not None:
            order = _track_order(prev, s.vectors)
            s = Spectrum(
                energies=s.energies[order],
                vectors=s.vectors[:, order],
                params=s.params,
                basis=s.basis,
            )
        prev = s.vectors
        out[idx] = abs(eigenbasis_operator(s, operator)[i, j])
    return out


# ---------------------------------------------------------------------------
# qubit-resonator dressed spectrum


@dataclass(frozen=True)
class DressedTransition:
    frequency: float  # GHz
    qubit_index: int  # bare-state identification of the final state
    photon_number: int
    weight_qubit: float  # |<gnd| drive charge operator |final>|
    weight_cavity: float  # |<gnd| a + a^dag |final>|

    @property
    def label(self) -> str:
        return f"q{self.qubit_index}p{self.photon_number}"


def coupled_spectrum(
    p: ZeroPiParams,
    r: ResonatorParams,
    k_qubit: int = 12,
    basis: BasisConfig | None = None,
    spectrum: Spectrum | None = None,
) -> list[DressedTransition]:
    """Dressed transitions of the qubit-resonator system from its ground state.

    The qubit is projected onto its ``k_qubit`` lowest eigenstates, then
    tensored with the resonator mode; the coupling is
    (beta_phi n_phi + beta_theta n_theta) * 2e V_rms (a + a^dag).
    Dressed states are identified with bare product states by maximum
    overlap, which labels photon-number-changing sidebands.
    """
    s = spectrum if spectrum is not None else solve(p, basis, k_qubit)
    n_ph = r.n_photon_max + 1
    if s.k * n_ph > 4096:
        raise ValueError("coupled dimension exceeds ceiling")
    g_op = r.coupling_ghz * (
        p.beta_phi * eigenbasis_operator(s, "n_phi")
        + p.beta_theta * eigenbasis_operator(s, "n_theta")
    )
    a = np.diag(np.sqrt(np.arange(1, n_ph)), 1)
    x = a + a.T
    eye_q = np.eye(s.k)
    eye_ph = np.eye(n_ph)
    h = (
        np.kron(np.diag(s.energies - s.energies[0]), eye_ph)
        + np.kron(eye_q, r.f_r * np.diag(np.arange(n_ph, dtype=float)))
        + np.kron(g_op, x)
    )
    vals, vecs = np.linalg.eigh(h)

    # bare identification by maximum overlap
    bare_of = np.argmax(np.abs(vecs), axis=0)
    gnd = int(np.argmin(vals))
    drive = np.kron(g_op, eye_ph)
    cavity = np.kron(eye_q, x)
    w_q = np.abs(vecs[:, gnd].conj() @ drive @ vecs)
    w_c = np.abs(vecs[:, gnd].conj() @ cavity @ vecs)

    out = []
    for j in range(len(vals)):
        if j == gnd:
            continue
        qi, ph = divmod(int(bare_of[j]), n_ph)
        out.append(
            DressedTransition(
                frequency=vals[j] - vals[gnd],
                qubit_index=qi,
                photon_number=ph,
                weight_qubit=float(w_q[j]),
                weight_cavity=float(w_c[j]),
            )
        )
    out.sort(key=lambda t: t.frequency)
    return out


# ---------------------------------------------------------------------------
# pump-probe dressed-state dispersion


def autler_townes_dispersion(
    omega_q, omega_c, Omega_c, convention: str = "as_published"
):
    """Dressed-doublet branches versus coupler frequency.

    ``as_published`` evaluates eps_pm = (w_q - w_c) +/- sqrt((w_q - w_c)^2
    + Omega_c^2), which yields a splitting of 2 Omega_c on resonance.
    ``symmetric`` uses the textbook half-splitting form
    eps_pm = [(w_q - w_c) +/- sqrt(...)] / 2.
    """
    if np.any(np.asarray(Omega_c) < 0):
        raise ValueError("Omega_c must be non-negative")
    delta = np.asarray(omega_q, dtype=float) - np.asarray(omega_c, dtype=float)
    root = np.sqrt(delta**2 + np.asarray(Omega_c, dtype=float) ** 2)
    if convention == "as_published":
        return delta + root, delta - root
    if convention == "symmetric":
        return (delta + root) / 2.0, (delta - root) / 2.0
    raise ValueError(f"unknown convention {convention!r}")


@dataclass
class ATFit:
    Omega_c: float
    omega_q: float
    residual: float
    branch_residuals: dict = field(default_factory=dict)


def fit_autler_townes(points, convention: str = "as_published") -> ATFit:
    """Least-squares (Omega_c, omega_q) from observed (omega_c, frequency)
    doublet lines; each point is assigned to its nearer branch."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("need >= 4 (omega_c, frequency) points")
    wc, f = pts[:, 0], pts[:, 1]
    if np.ptp(wc) == 0:
        raise ValueError("degenerate data: coupler frequency does not vary")

    def residual(x):
        om, wq = abs(x[0]), x[1]
        ep, em = autler_townes_dispersion(wq, wc, om, convention)
        return np.minimum(np.abs(f - ep), np.abs(f - em))

    wq0 = wc[np.argmin(np.abs(f))] if len(wc) else wc.mean()
    x0 = np.array([np.ptp(f) / 4 + 1e-6, wq0])
    sol = opt.least_squares(residual, x0)
    om, wq = abs(sol.x[0]), sol.x[1]
    ep, em = autler_townes_dispersion(wq, wc, om, convention)
    on_plus = np.abs(f - ep) <= np.abs(f - em)
    branch_res = {
        "plus": float(np.sqrt(np.mean((f[on_plus] - ep[on_plus]) ** 2)))
        if on_plus.any()
        else np.nan,
        "minus": float(np.sqrt(np.mean((f[~on_plus] - em[~on_plus]) ** 2)))
        if (~on_plus).any()
        else np.nan,
    }
    return ATFit(
        Omega_c=om,
        omega_q=wq,
        residual=float(np.sqrt(np.mean(residual(sol.x) ** 2))),
        branch_residuals=branch_res,
    )
