"""Multivariate fit of the two-mode model to spectroscopy datasets.

Fits the seven device parameters (E_C_phi, E_C_theta, E_J, E_L, dE_J,
beta_phi, beta_theta) to two-tone spectroscopy scans taken at fixed
offset charge while sweeping the external flux.  The model frequencies
come from the qubit-resonator coupled spectrum, so the drive couplings
beta enter through dispersive shifts.  The objective is minimized with
a bounded derivative-free simplex search with restarts, because the
nearest-transition assignment of unlabeled points makes the error
metric non-differentiable.

The mode-mode coupling g_phi_theta is fixed to zero during fitting by
default and can be freed explicitly.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .hamiltonian import BasisConfig, ZeroPiParams, solve
from .spectroscopy import ResonatorParams, coupled_spectrum


class FitError(RuntimeError):
    """Dataset validation or model-evaluation failure."""


PARAM_NAMES = (
    "E_C_phi",
    "E_C_theta",
    "E_J",
    "E_L",
    "dE_J",
    "beta_phi",
    "beta_theta",
)

#: Default relative box around the initial point, per parameter.
DEFAULT_BOUND_FACTOR = 1.6


@dataclass(frozen=True)
class FitPoint:
    """One measured spectral line (frequencies in GHz, flux in Phi_0)."""

    flux: float
    n_g: float
    freq_ghz: float
    weight: float = 1.0
    from_label: str | None = None
    to_label: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.flux):
            raise FitError("flux must be finite")
        if self.freq_ghz <= 0:
            raise FitError("frequencies must be positive")
        if self.weight < 0:
            raise FitError("weights must be non-negative")
        if (self.from_label is None) != (self.to_label is None):
            raise FitError("labels must come in (from, to) pairs")

    @property
    def labeled(self) -> bool:
        return self.to_label is not None


@dataclass
class SpectroscopyDataset:
    """A list of spectroscopy points plus scan metadata.

    A scan taken through its own readout resonator can carry that
    resonator here; it then overrides the problem-level resonator when
    the model is evaluated against this dataset.
    """

    points: list[FitPoint]
    metadata: dict = field(default_factory=dict)
    resonator: "ResonatorParams | None" = None

    def __post_init__(self):
        if not self.points:
            raise FitError("dataset is empty")

    @property
    def has_labels(self) -> bool:
        return any(p.labeled for p in self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["flux_phi0", "ng", "freq_ghz", "weight", "from_label", "to_label"]
            )
            for p in self.points:
                w.writerow(
                    [
                        repr(p.flux),
                        repr(p.n_g),
                        repr(p.freq_ghz),
                        repr(p.weight),
                        p.from_label or "",
                        p.to_label or "",
                    ]
                )

    @classmethod
    def from_csv(cls, path, metadata: dict | None = None) -> "SpectroscopyDataset":
        points = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"flux_phi0", "ng", "freq_ghz"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise FitError(
                    f"{path}: need columns flux_phi0, ng, freq_ghz "
                    f"(got {reader.fieldnames})"
                )
            for lineno, row in enumerate(reader, start=2):
                try:
                    points.append(
                        FitPoint(
                            flux=float(row["flux_phi0"]),
                            n_g=float(row["ng"]),
                            freq_ghz=float(row["freq_ghz"]),
                            weight=float(row.get("weight") or 1.0),
                            from_label=row.get("from_label") or None,
                            to_label=row.get("to_label") or None,
                        )
                    )
                except (FitError, ValueError) as exc:
                    raise FitError(f"{path}:{lineno}: {exc}") from exc
        if not points:
            raise FitError(f"{path}: no data rows")
        return cls(points=points, metadata=metadata or {})


def load_dataset(path) -> SpectroscopyDataset:
    return SpectroscopyDataset.from_csv(path)


@dataclass
class FitProblem:
    """Fit configuration: initial parameters, bounds and solver settings."""

    initial: ZeroPiParams
    resonator: ResonatorParams
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    basis: BasisConfig | None = None
    k_qubit: int = 10
    assignment_window: float = 0.5  # GHz, for unlabeled points
    free_g: bool = False
    workers: int = 4
    maxiter: int = 2000
    restarts: int = 1
    xatol: float = 1e-5
    fatol: float = 1e-12

    def initial_vector(self) -> np.ndarray:
        return np.array([getattr(self.initial, n) for n in PARAM_NAMES])

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x0 = self.initial_vector()
        lo = np.empty(7)
        hi = np.empty(7)
        for i, name in enumerate(PARAM_NAMES):
            if name in self.bounds:
                lo[i], hi[i] = self.bounds[name]
            elif name == "dE_J":
                lo[i], hi[i] = 0.0, 0.5
            else:
                lo[i] = min(x0[i] / DEFAULT_BOUND_FACTOR,
                            x0[i] * DEFAULT_BOUND_FACTOR)
                hi[i] = max(x0[i] / DEFAULT_BOUND_FACTOR,
                            x0[i] * DEFAULT_BOUND_FACTOR)
                if lo[i] == hi[i]:
                    # zero initial value: allow a sign-symmetric window
                    lo[i], hi[i] = -0.1, 0.1
            if not (np.isfinite(lo[i]) and np.isfinite(hi[i]) and lo[i] < hi[i]):
                raise FitError(f"bounds for {name} must be finite and ordered")
        if np.any(x0 < lo) or np.any(x0 > hi):
            raise FitError("initial point must lie within bounds")
        return lo, hi

    def params_at(self, x: np.ndarray) -> ZeroPiParams:
        kw = dict(zip(PARAM_NAMES, (float(v) for v in x)))
        if not self.free_g:
            kw["g_phi_theta"] = 0.0
        return self.initial.replace(**kw)


@dataclass
class FitResult:
    params: dict[str, float]
    metric: float
    residuals: np.ndarray
    assignment: list[str | None]
    trace: list[float]
    converged: bool
    n_evaluations: int

    def to_json(self, path=None) -> str:
        doc = {
            "params": self.params,
            "metric": self.metric,
            "residuals_ghz": [float(r) for r in self.residuals],
            "assignment": self.assignment,
            "best_metric_trace": [float(m) for m in self.trace],
            "converged": self.converged,
            "n_evaluations": self.n_evaluations,
        }
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def model_transitions(
    p: ZeroPiParams,
    r: ResonatorParams,
    flux: float,
    n_g: float,
    basis: BasisConfig | None = None,
    k_qubit: int = 10,
) -> dict[str, float]:
    """Dressed transition frequencies from the ground state, keyed by the
    bare-identification label q{i}p{n}.  When two dressed states map to
    the same bare label (near a crossing) the stronger-driven one wins."""
    pp = p.replace(flux=flux, n_g=n_g)
    try:
        trans = coupled_spectrum(pp, r, k_qubit=k_qubit, basis=basis)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"model evaluation failed at {pp}: {exc}") from exc
    out: dict[str, float] = {}
    strength: dict[str, float] = {}
    for t in trans:
        w = max(t.weight_qubit, t.weight_cavity)
        if t.label not in out or w > strength[t.label]:
            out[t.label] = float(t.frequency)
            strength[t.label] = w
    return out


def residuals(
    x: np.ndarray,
    datasets: list[SpectroscopyDataset],
    problem: FitProblem,
) -> tuple[np.ndarray, float, list[str | None]]:
    """Per-point residuals (GHz), weighted squared-error metric, and the
    transition label assigned to each point.

    The model is evaluated once per unique (flux, n_g, resonator)
    combination.  Labeled points compare against f(to) - f(from);
    unlabeled points take the nearest model line within the assignment
    window and otherwise contribute the window value as penalty.
    """
    p = problem.params_at(x)

    def key_of(ds, pt):
        r = ds.resonator if ds.resonator is not None else problem.resonator
        return (pt.flux, pt.n_g, r.f_r, r.Z_r, r.n_photon_max)

    resonators = {}
    keys = []
    for ds in datasets:
        for pt in ds.points:
            key = key_of(ds, pt)
            if key not in resonators:
                resonators[key] = (ds.resonator if ds.resonator is not None
                                   else problem.resonator)
                keys.append(key)

    def evaluate(key):
        return model_transitions(
            p, resonators[key], key[0], key[1],
            basis=problem.basis, k_qubit=problem.k_qubit,
        )

    if problem.workers > 1:
        with ThreadPoolExecutor(max_workers=problem.workers) as ex:
            cache = dict(zip(keys, ex.map(evaluate, keys)))
    else:
        cache = {key: evaluate(key) for key in keys}
    res = []
    assignment: list[str | None] = []
    for ds in datasets:
        for pt in ds.points:
            lines = cache[key_of(ds, pt)]
            if pt.labeled:
                f_from = 0.0 if pt.from_label == "q0p0" else lines.get(pt.from_label)
                f_to = lines.get(pt.to_label)
                if f_from is None or f_to is None:
                    res.append(problem.assignment_window)
                    assignment.append(None)
                else:
                    res.append(pt.freq_ghz - (f_to - f_from))
                    assignment.append(pt.to_label)
            else:
                labels = list(lines)
                freqs = np.array([lines[l] for l in labels])
                j = int(np.argmin(np.abs(freqs - pt.freq_ghz)))
                if abs(freqs[j] - pt.freq_ghz) <= problem.assignment_window:
                    res.append(pt.freq_ghz - freqs[j])
                    assignment.append(labels[j])
                else:
                    res.append(problem.assignment_window)
                    assignment.append(None)
    res = np.array(res)
    weights = np.array([pt.weight for ds in datasets for pt in ds.points])
    metric = float(np.sum(weights * res**2))
    return res, metric, assignment


def fit_spectrum(
    problem: FitProblem, datasets: list[SpectroscopyDataset]
) -> FitResult:
    """Bounded simplex minimization of the spectroscopy error metric.

    Runs Nelder-Mead in coordinates scaled by the initial point, then
    restarts from the running best with a fresh simplex.  Deterministic
    for fixed settings.  Non-convergence returns the best point found
    with ``converged`` False.
    """
    n_points = sum(len(ds.points) for ds in datasets)
    if n_points < len(PARAM_NAMES):
        raise FitError("need at least as many points as free parameters")
    lo, hi = problem.bound_arrays()
    scale = problem.initial_vector()
    if np.any(scale == 0):
        raise FitError("initial parameters must be nonzero (used for scaling)")

    trace: list[float] = []
    n_eval = 0

    def objective(u):
        nonlocal n_eval
        x = np.clip(u * scale, lo, hi)
        _, metric, _ = residuals(x, datasets, problem)
        n_eval += 1
        trace.append(min(metric, trace[-1]) if trace else metric)
        return metric

    u_best = problem.initial_vector() / scale
    f_best = objective(u_best)
    success = False
    for attempt in range(problem.restarts + 1):
        sol = minimize(
            objective,
            u_best,
            method="Nelder-Mead",
            bounds=list(zip(lo / scale, hi / scale)),
            options={
                "maxiter": problem.maxiter,
                "xatol": problem.xatol,
                "fatol": problem.fatol,
                "adaptive": True,
                "initial_simplex": _simplex_around(
                    u_best, 0.05 / (2.0**attempt), lo / scale, hi / scale
                ),
            },
        )
        if sol.fun <= f_best:
            f_best, u_best = float(sol.fun), np.array(sol.x)
        success = success or bool(sol.success)

    x_best = np.clip(u_best * scale, lo, hi)
    res, metric, assignment = residuals(x_best, datasets, problem)
    return FitResult(
        params=dict(zip(PARAM_NAMES, (float(v) for v in x_best))),
        metric=metric,
        residuals=res,
        assignment=assignment,
        trace=trace,
        converged=success,
        n_evaluations=n_eval,
    )


def _simplex_around(u0, step, lo, hi):
    n = len(u0)
    simplex = np.tile(u0, (n + 1, 1))
    for i in range(n):
        move = step * max(abs(u0[i]), 1e-3)
        if simplex[i + 1, i] + move > hi[i]:
            move = -move
        simplex[i + 1, i] = np.clip(simplex[i + 1, i] + move, lo[i], hi[i])
    return simplex


def generate_synthetic_dataset(
    truth: ZeroPiParams,
    resonator: ResonatorParams,
    flux_values,
    n_g: float,
    labels: list[str] | None = None,
    noise_mhz: float = 0.0,
    rng: np.random.Generator | None = None,
    basis: BasisConfig | None = None,
    k_qubit: int = 10,
) -> SpectroscopyDataset:
    """One labeled flux scan evaluated from the coupled model.

    By default the lines are the first seven qubit transitions plus the
    resonator line q0p1 (eight per flux point), which makes both drive
    couplings observable through their dispersive shifts.
    """
    if labels is None:
        labels = [f"q{i}p0" for i in range(1, 8)] + ["q0p1"]
    if rng is None:
        rng = np.random.default_rng(0)
    points = []
    cache: dict[float, dict[str, float]] = {}
    for flux in flux_values:
        flux = float(flux)
        if flux not in cache:
            cache[flux] = model_transitions(
                truth, resonator, flux, n_g, basis=basis, k_qubit=k_qubit
            )
        lines = cache[flux]
        for lab in labels:
            if lab not in lines:
                raise FitError(f"label {lab} absent from model at flux={flux}")
            f = lines[lab] + 1e-3 * noise_mhz * rng.standard_normal()
            points.append(
                FitPoint(
                    flux=flux,
                    n_g=n_g,
                    freq_ghz=float(f),
                    from_label="q0p0",
                    to_label=lab,
                )
            )
    return SpectroscopyDataset(
        points=points, metadata={"n_g": n_g}, resonator=resonator
    )
