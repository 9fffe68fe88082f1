"""Lambda-system Raman transfer: analytic evolution and Lindblad dynamics.

Three levels |0>, |1>, |2> with 0 = omega_0 < omega_2 < omega_1; two
drives couple |0>-|1> and |1>-|2>, both detuned by Delta from the
intermediate level.  In the rotating frame after the RWA the Hamiltonian
is time independent for square pulses,

    H = Delta |1><1| + (Omega_alpha/2) |0><1| + (Omega_beta/2) |1><2| + h.c.

which admits closed-form dressed states and evolution.  Gaussian pulses
and decay channels are handled by direct integration of the Lindblad
master equation.

Units: angular frequencies in rad/us (multiply MHz by 2 pi), times in us.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit


class RamanError(RuntimeError):
    """Calibration, integration or fitting failure."""


@dataclass(frozen=True)
class LambdaSystem:
    """Level frequencies and decay rates of the three-level system.

    ``Gamma_10`` and ``Gamma_12`` are relaxation rates out of the
    intermediate level, ``Gamma_1_phi`` its dephasing collapse rate.
    ``Gamma_20`` (relaxation |2> -> |0>) and ``Gamma_2_phi`` (dephasing
    collapse on |2>) model the effective two-level qubit decay and are
    zero by default.  A dephasing collapse operator sqrt(G)|i><i| decays
    coherences involving |i> at G/2.
    """

    omega_1: float
    omega_2: float
    Gamma_10: float = 0.0
    Gamma_12: float = 0.0
    Gamma_1_phi: float = 0.0
    Gamma_20: float = 0.0
    Gamma_2_phi: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.omega_2 < self.omega_1:
            raise ValueError("level ordering requires 0 < omega_2 < omega_1")
        rates = (self.Gamma_10, self.Gamma_12, self.Gamma_1_phi,
                 self.Gamma_20, self.Gamma_2_phi)
        if any(g < 0 for g in rates):
            raise ValueError("decay rates must be non-negative")

    def replace(self, **kw) -> "LambdaSystem":
        return replace(self, **kw)

    def collapse_operators(self) -> list[np.ndarray]:
        ops = []
        for rate, (i, j) in (
            (self.Gamma_10, (0, 1)),
            (self.Gamma_12, (2, 1)),
            (self.Gamma_1_phi, (1, 1)),
            (self.Gamma_20, (0, 2)),
            (self.Gamma_2_phi, (2, 2)),
        ):
            if rate > 0:
                op = np.zeros((3, 3))
                op[i, j] = np.sqrt(rate)
                ops.append(op)
        return ops


@dataclass(frozen=True)
class LambdaDrive:
    """Square-pulse drive amplitudes and common detuning (rad/us)."""

    Omega_alpha: float
    Omega_beta: float
    Delta: float = 0.0

    def __post_init__(self):
        if self.Omega_alpha < 0 or self.Omega_beta < 0:
            raise ValueError("drive amplitudes must be non-negative")

    @property
    def Omega_tilde(self) -> float:
        return np.sqrt(self.Delta**2 + self.Omega_alpha**2 + self.Omega_beta**2)


@dataclass
class DressedSystem:
    """Eigenfrequencies and normalized dressed states (columns, basis
    order |0>, |1>, |2>; column order dark, plus, minus)."""

    eps_0: float
    eps_plus: float
    eps_minus: float
    states: np.ndarray


def dressed_lambda_eigensystem(d: LambdaDrive) -> DressedSystem:
    """Closed-form dressed states of the rotating-frame Hamiltonian.

    The dark state -Omega_beta|0> + Omega_alpha|2> has frequency 0; the
    bright states Omega_alpha|0> + (Delta +- Omega_tilde)|1> +
    Omega_beta|2> have (Delta +- Omega_tilde)/2.  Returned normalized.
    """
    oa, ob, delta = d.Omega_alpha, d.Omega_beta, d.Delta
    omega = d.Omega_tilde
    eps_p = 0.5 * (delta + omega)
    eps_m = 0.5 * (delta - omega)
    if oa == 0.0 and ob == 0.0:
        # undriven limit: the Lambda levels themselves
        states = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).T
        return DressedSystem(0.0, eps_p, eps_m, states[:, [0, 1, 2]])
    dark = np.array([-ob, 0.0, oa])
    plus = np.array([oa, delta + omega, ob])
    minus = np.array([oa, delta - omega, ob])
    states = np.column_stack(
        [v / np.linalg.norm(v) for v in (dark, plus, minus)]
    )
    return DressedSystem(0.0, eps_p, eps_m, states)


def lambda_analytic_evolution(d: LambdaDrive, t):
    """(alpha, beta, gamma) amplitudes at time t for square pulses and
    initial state |0>.

    Implements the closed forms; alpha is evaluated in the equivalent
    grouping [Omega_beta^2 + Omega_alpha^2 e^{-i Delta t/2}(...)] /
    (Omega_alpha^2 + Omega_beta^2), which is finite for Omega_alpha = 0.
    """
    t = np.asarray(t, dtype=float)
    oa, ob, delta = d.Omega_alpha, d.Omega_beta, d.Delta
    if oa == 0.0 and ob == 0.0:
        one = np.ones_like(t, dtype=complex)
        zero = np.zeros_like(t, dtype=complex)
        return one, zero, zero
    omega = d.Omega_tilde
    rot = np.exp(-0.5j * delta * t)
    core = np.cos(0.5 * omega * t) + 1j * (delta / omega) * np.sin(0.5 * omega * t)
    denom = oa**2 + ob**2
    alpha = (ob**2 + oa**2 * rot * core) / denom
    beta = (oa / omega) * (-1j * rot * np.sin(0.5 * omega * t))
    gamma = (oa * ob / denom) * (-1.0 + rot * core)
    return alpha, beta, gamma


def effective_rabi_rate(
    Omega_alpha: float, Omega_beta: float, Delta: float
) -> float:
    """Two-photon Rabi rate Omega_alpha Omega_beta / (2 Delta) of the
    adiabatically eliminated two-level system."""
    if Delta == 0.0:
        raise ValueError("adiabatic elimination requires Delta != 0")
    return Omega_alpha * Omega_beta / (2.0 * Delta)


# ---------------------------------------------------------------------------
# pulses


@dataclass(frozen=True)
class Pulse:
    """One drive-tone envelope.

    ``shape`` is "square" (flat between t_start and t_stop) or "gaussian"
    (center/sigma, truncated to total width 4 sigma with no rescaling).
    ``phase`` rotates the drive term to (amp/2) e^{i phase} sigma_ij + h.c.
    """

    drive: str  # "alpha" or "beta"
    amplitude: float
    shape: str = "gaussian"
    t_start: float = 0.0
    t_stop: float = 0.0
    center: float = 0.0
    sigma: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.drive not in ("alpha", "beta"):
            raise ValueError("drive must be 'alpha' or 'beta'")
        if self.shape not in ("square", "gaussian"):
            raise ValueError("shape must be 'square' or 'gaussian'")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.shape == "gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def window(self) -> tuple[float, float]:
        if self.shape == "square":
            return (self.t_start, self.t_stop)
        return (self.center - 2.0 * self.sigma, self.center + 2.0 * self.sigma)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.window
        inside = (t >= lo) & (t <= hi)
        if self.shape == "square":
            return self.amplitude * inside
        return self.amplitude * np.exp(
            -0.5 * ((t - self.center) / self.sigma) ** 2
        ) * inside


@dataclass
class PulseSchedule:
    """A list of pulses on the two drives."""

    pulses: list[Pulse] = field(default_factory=list)

    @property
    def t_end(self) -> float:
        return max((p.window[1] for p in self.pulses), default=0.0)

    def complex_amplitude(self, drive: str, t: float) -> complex:
        total = 0.0j
        for p in self.pulses:
            if p.drive == drive:
                total += p.envelope(t) * np.exp(1j * p.phase)
        return total

    def to_dict(self) -> dict:
        return {"pulses": [vars(p) for p in self.pulses]}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSchedule":
        return cls(pulses=[Pulse(**p) for p in d["pulses"]])

    @classmethod
    def raman_pair(
        cls,
        amplitude: float,
        center: float,
        sigma: float,
        phase: float = 0.0,
    ) -> list[Pulse]:
        """The two simultaneous Gaussian tones of one Raman pulse; the
        relative phase is carried by the beta tone."""
        return [
            Pulse(drive="alpha", amplitude=amplitude, center=center, sigma=sigma),
            Pulse(
                drive="beta",
                amplitude=amplitude,
                center=center,
                sigma=sigma,
                phase=phase,
            ),
        ]


# ---------------------------------------------------------------------------
# Lindblad propagation


@dataclass
class RamanTrajectory:
    t: np.ndarray
    rho: np.ndarray  # (len(t), 3, 3)
    signal: np.ndarray

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.rho))


def _hamiltonian_at(sched: PulseSchedule, Delta: float, delta_2: float, t: float):
    h = np.zeros((3, 3), dtype=complex)
    h[1, 1] = Delta
    h[2, 2] = delta_2
    a = 0.5 * sched.complex_amplitude("alpha", t)
    b = 0.5 * sched.complex_amplitude("beta", t)
    h[0, 1] = a
    h[1, 0] = np.conj(a)
    h[1, 2] = b
    h[2, 1] = np.conj(b)
    return h


def _liouvillian(h: np.ndarray, collapse: list[np.ndarray]) -> np.ndarray:
    """Superoperator acting on the row-major vectorization of rho."""
    eye = np.eye(3)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in collapse:
        cdc = c.conj().T @ c
        lv += np.kron(c, c.conj())
        lv -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return lv


def lindblad_evolve(
    sys: LambdaSystem,
    sched: PulseSchedule,
    Delta: float,
    t_grid: np.ndarray,
    rho0: np.ndarray | None = None,
    signal_weights: tuple[float, float] = (0.0, 1.0),
    delta_2: float = 0.0,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> RamanTrajectory:
    """Integrate the master equation over ``t_grid`` (ascending, us).

    ``delta_2`` is an optional two-photon detuning term delta_2 |2><2|.
    The signal is the homodyne proxy w0 P0 + w2 P2.

    Driven windows are integrated with an adaptive Runge-Kutta scheme;
    drive-free windows use the exact exponential of the then-constant
    Liouvillian, so long waits between pulses cost nothing.
    """
    from scipy.linalg import expm

    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending with at least two points")
    if rho0 is None:
        rho0 = np.zeros((3, 3), dtype=complex)
        rho0[0, 0] = 1.0
    collapse = sys.collapse_operators()
    c_pairs = [(c, c.conj().T @ c) for c in collapse]

    def rhs(t, y):
        rho = y.reshape(3, 3)
        h = _hamiltonian_at(sched, Delta, delta_2, t)
        drho = -1j * (h @ rho - rho @ h)
        for c, cdc in c_pairs:
            drho += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
        return drho.ravel()

    h_free = _hamiltonian_at(PulseSchedule(), Delta, delta_2, 0.0)
    lv_free = _liouvillian(h_free, collapse)

    # split the requested span at pulse-window edges
    edges = {t_grid[0], t_grid[-1]}
    for p in sched.pulses:
        for e in p.window:
            if t_grid[0] < e < t_grid[-1]:
                edges.add(float(e))
    edges = np.array(sorted(edges))

    out = np.empty((len(t_grid), 9), dtype=complex)
    y = rho0.ravel().astype(complex)
    if t_grid[0] == edges[0]:
        out[t_grid == edges[0]] = y
    for s0, s1 in zip(edges[:-1], edges[1:]):
        sel = (t_grid > s0) & (t_grid <= s1)
        mid = 0.5 * (s0 + s1)
        driven = any(
            p.window[0] < s1 and p.window[1] > s0 and p.envelope(mid) != 0
            for p in sched.pulses
        )
        if driven:
            t_eval = np.unique(np.concatenate([t_grid[sel], [s1]]))
            sol = solve_ivp(
                rhs, (s0, s1), y, t_eval=t_eval, method="DOP853",
                rtol=rtol, atol=atol,
            )
            if not sol.success:
                raise RamanError(
                    f"master-equation integration failed: {sol.message}"
                )
            ys = sol.y.T
            out[sel] = ys[np.searchsorted(t_eval, t_grid[sel])]
            y = ys[-1]
        else:
            for idx in np.nonzero(sel)[0]:
                out[idx] = expm(lv_free * (t_grid[idx] - s0)) @ y
            y = expm(lv_free * (s1 - s0)) @ y
    rho = out.reshape(len(t_grid), 3, 3)
    pops = np.real(np.einsum("tii->ti", rho))
    w0, w2 = signal_weights
    signal = w0 * pops[:, 0] + w2 * pops[:, 2]
    return RamanTrajectory(t=t_grid, rho=rho, signal=signal)


# ---------------------------------------------------------------------------
# pulse calibration and coherence sequences


def _gaussian_area_factor() -> float:
    """Integral of exp(-x^2/sigma^2) ... of the squared truncated
    envelope g(t)^2 with unit sigma and unit peak, over the 4 sigma
    window."""
    from scipy.special import erf

    # int exp(-(t/s)^2) dt over +-2s = s sqrt(pi) erf(2)
    return float(np.sqrt(np.pi) * erf(2.0))


def pi_pulse_amplitude(Delta: float, sigma: float, angle: float = np.pi) -> float:
    """Peak amplitude of an equal-tone Gaussian Raman pulse whose
    accumulated two-photon rotation angle int Omega_R(t) dt equals
    ``angle`` (Omega_R(t) = A^2 g(t)^2 / 2 Delta)."""
    if Delta <= 0:
        raise ValueError("Delta must be positive for Raman calibration")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    area = sigma * _gaussian_area_factor()
    return float(np.sqrt(2.0 * Delta * angle / area))


def calibrate_pi_amplitude(
    sys: LambdaSystem,
    Delta: float,
    sigma: float,
    scan_points: int = 11,
    min_transfer: float = 0.9,
) -> float:
    """Refine the analytic pi-pulse amplitude by a transfer scan.

    Scans peak amplitudes around the area-based estimate, interpolates
    the |0> -> |2> transfer maximum with a parabola, and raises if the
    best transfer stays below ``min_transfer``.
    """
    guess = pi_pulse_amplitude(Delta, sigma)
    amps = np.linspace(0.7 * guess, 1.3 * guess, scan_points)
    transfer = np.array(
        [_single_pulse_transfer(sys, Delta, sigma, a) for a in amps]
    )
    best = int(np.argmax(transfer))
    if transfer[best] < min_transfer:
        raise RamanError(
            f"calibration failed: best transfer {transfer[best]:.3f} < "
            f"{min_transfer} (increase Delta/sigma or reduce decay rates)"
        )
    if 0 < best < scan_points - 1:
        y0, y1, y2 = transfer[best - 1 : best + 2]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            return float(amps[best] + shift * (amps[1] - amps[0]))
    return float(amps[best])


def _single_pulse_transfer(
    sys: LambdaSystem, Delta: float, sigma: float, amplitude: float
) -> float:
    sched = PulseSchedule(
        PulseSchedule.raman_pair(amplitude, center=2.0 * sigma, sigma=sigma)
    )
    t = np.linspace(0.0, 4.0 * sigma, 2)
    traj = lindblad_evolve(sys, sched, Delta, t)
    return float(traj.populations[-1, 2])


SEQUENCE_KINDS = ("rabi_amplitude", "rabi_detuning", "t1", "ramsey", "echo")


@dataclass
class SequenceResult:
    kind: str
    x: np.ndarray  # amplitude, detuning or delay axis
    signal: np.ndarray  # population of |2> after the sequence
    amplitude_pi: float


def simulate_sequence(
    kind: str,
    sys: LambdaSystem,
    Delta: float,
    sigma: float,
    x_grid: np.ndarray,
    amplitude_pi: float | None = None,
    calibrate: bool = False,
    delta_2: float = 0.0,
    fringe_rate: float = 0.0,
) -> SequenceResult:
    """Emulate a pulsed coherence measurement, returning P2 vs the axis.

    t1: pi pulse, variable wait.  ramsey: pi/2, wait, pi/2 (the second
    pulse phase advances at ``fringe_rate`` rad/us to produce fringes).
    echo: pi/2, wait/2, pi, wait/2, pi/2.  rabi_amplitude/rabi_detuning
    scan a single pulse over amplitude / detuning.
    """
    if kind not in SEQUENCE_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}")
    x_grid = np.asarray(x_grid, dtype=float)
    if amplitude_pi is None:
        amplitude_pi = (
            calibrate_pi_amplitude(sys, Delta, sigma)
            if calibrate
            else pi_pulse_amplitude(Delta, sigma)
        )
    a_pi = float(amplitude_pi)
    a_half = a_pi / np.sqrt(2.0)  # rotation angle scales with amplitude^2
    width = 4.0 * sigma

    def run(sched: PulseSchedule, t_end: float) -> float:
        traj = lindblad_evolve(
            sys, sched, Delta, np.array([0.0, t_end]), delta_2=delta_2
        )
        return float(traj.populations[-1, 2])

    signal = np.empty(len(x_grid))
    for i, x in enumerate(x_grid):
        if kind == "rabi_amplitude":
            sched = PulseSchedule(
                PulseSchedule.raman_pair(x, center=2.0 * sigma, sigma=sigma)
            )
            signal[i] = run(sched, width)
        elif kind == "rabi_detuning":
            sched = PulseSchedule(
                PulseSchedule.raman_pair(a_pi, center=2.0 * sigma, sigma=sigma)
            )
            traj = lindblad_evolve(
                sys, sched, x, np.array([0.0, width]), delta_2=delta_2
            )
            signal[i] = traj.populations[-1, 2]
        elif kind == "t1":
            sched = PulseSchedule(
                PulseSchedule.raman_pair(a_pi, center=2.0 * sigma, sigma=sigma)
            )
            signal[i] = run(sched, width + x)
        elif kind == "ramsey":
            pulses = PulseSchedule.raman_pair(a_half, 2.0 * sigma, sigma)
            pulses += PulseSchedule.raman_pair(
                a_half, width + x + 2.0 * sigma, sigma, phase=fringe_rate * x
            )
            signal[i] = run(PulseSchedule(pulses), 2.0 * width + x)
        else:  # echo
            pulses = PulseSchedule.raman_pair(a_half, 2.0 * sigma, sigma)
            pulses += PulseSchedule.raman_pair(
                a_pi, width + 0.5 * x + 2.0 * sigma, sigma
            )
            pulses += PulseSchedule.raman_pair(
                a_half, 2.0 * width + x + 2.0 * sigma, sigma,
                phase=fringe_rate * x,
            )
            signal[i] = run(PulseSchedule(pulses), 3.0 * width + x)
    return SequenceResult(kind=kind, x=x_grid, signal=signal, amplitude_pi=a_pi)


# ---------------------------------------------------------------------------
# decay fitting


@dataclass
class DecayFit:
    model: str
    rate: float
    amplitude: float
    offset: float
    frequency: float | None
    phase: float | None
    residual_rms: float


def fit_decay(t, signal, model: str = "exp") -> DecayFit:
    """Least-squares fit of a * exp(-r t) + c, optionally times
    cos(2 pi f t + phi) for the "exp_cos" model."""
    t = np.asarray(t, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if len(t) < 8:
        raise ValueError("need at least 8 samples")
    if model not in ("exp", "exp_cos"):
        raise ValueError("model must be 'exp' or 'exp_cos'")

    span = t[-1] - t[0]
    amp0 = float(signal.max() - signal.min())
    if model == "exp":
        off0 = float(signal[-1])
        a0 = float(signal[0] - off0) or amp0 or 1.0

        def f(t, a, r, c):
            return a * np.exp(-r * t) + c

        p0 = (a0, 1.0 / max(span, 1e-12), off0)
    else:
        off0 = float(signal.mean())
        centered = signal - off0
        freqs = np.fft.rfftfreq(len(t), d=(t[1] - t[0]))
        spec = np.abs(np.fft.rfft(centered))
        f0 = float(freqs[1 + np.argmax(spec[1:])])

        def f(t, a, r, c, nu, phi):
            return a * np.exp(-r * t) * np.cos(2 * np.pi * nu * t + phi) + c

        p0 = (amp0 / 2 or 1.0, 1.0 / max(span, 1e-12), off0, f0, 0.0)

    try:
        popt, _ = curve_fit(f, t, signal, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        resid = signal - f(t, *p0)
        raise RamanError(
            f"decay fit did not converge: {exc}; initial-guess residual "
            f"rms {np.sqrt(np.mean(resid**2)):.3e}"
        ) from exc
    resid = signal - f(t, *popt)
    rms = float(np.sqrt(np.mean(resid**2)))
    if model == "exp":
        a, r, c = popt
        return DecayFit("exp", abs(float(r)), float(a), float(c), None, None, rms)
    a, r, c, nu, phi = popt
    return DecayFit(
        "exp_cos", abs(float(r)), float(a), float(c), abs(float(nu)),
        float(phi), rms,
    )
