"""Command-line front end: reproducible quantize / spectrum / wannier /
raman / fit runs plus a report step that renders figures.

Conventions: every run writes its delimited and JSON outputs into an
output directory together with a manifest (config hash, package
versions, timings).  Quantities in files carry explicit unit suffixes
(GHz, MHz, fF, us); dimensionless fields (flux in Phi_0, n_g, beta,
dE_J) are bare.  Exit codes: 0 success, 2 input validation, 3 numerical
failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .circuit import CapacitanceNetwork, CircuitError, quantize
from .fitting import (
    FitError,
    FitProblem,
    PARAM_NAMES,
    fit_spectrum,
    load_dataset,
)
from .hamiltonian import BasisConfig, Spectrum, ZeroPiParams, solve
from .raman import (
    LambdaSystem,
    Pulse,
    PulseSchedule,
    RamanError,
    lindblad_evolve,
    simulate_sequence,
)
from .spectroscopy import (
    ResonatorParams,
    _track_order,
    transition_table,
)
from .tightbinding import (
    TightBindingError,
    band_dispersion,
    hopping_integral,
    participation_width,
    recenter_valley,
    wannier_function,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_NO_CONVERGENCE = 4

TWO_PI = 2.0 * np.pi


class InputError(ValueError):
    """Invalid configuration or input file."""


# ---------------------------------------------------------------------------
# input parsing helpers


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"input file not found: {p}")
    try:
        with open(p) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{p}: expected a JSON object")
    return doc


def _strip_units(doc: dict) -> dict:
    """Map suffixed keys (E_J_GHz, sigma_us, ...) onto bare field names."""
    out = {}
    for key, value in doc.items():
        for suffix in ("_GHz", "_MHz", "_fF", "_per_us", "_us", "_rad"):
            if key.endswith(suffix):
                if suffix == "_MHz":
                    value = value * 1e-3  # store as GHz
                out[key[: -len(suffix)]] = value
                break
        else:
            out[key] = value
    return out


def params_from_dict(doc: dict) -> ZeroPiParams:
    fields = _strip_units(doc)
    known = {
        "E_C_theta", "E_C_phi", "E_J", "E_L", "dE_J",
        "g_phi_theta", "n_g", "flux", "beta_phi", "beta_theta",
    }
    unknown = sorted(fields.keys() - known)
    if unknown:
        raise InputError(f"unknown parameter fields: {', '.join(unknown)}")
    try:
        return ZeroPiParams(**fields)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid parameters: {exc}") from exc


def _config_hash(args: argparse.Namespace, inputs: list[Path]) -> str:
    h = hashlib.sha256()
    skip = {"output", "plot", "dry_run", "workers"}
    for key, value in sorted(vars(args).items()):
        if key in skip or callable(value):
            continue
        h.update(f"{key}={value!r};".encode())
    for p in inputs:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _write_manifest(outdir: Path, args, inputs: list[Path], timings: dict):
    doc = {
        "subcommand": args.subcommand,
        "config_hash": _config_hash(args, inputs),
        "versions": {
            "artifact": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_quantize(args) -> int:
    net_doc = _load_json(args.network)
    try:
        net = CapacitanceNetwork.from_dict(_strip_units(net_doc))
    except CircuitError as exc:
        raise InputError(str(exc)) from exc
    if args.scale_caps != 1.0:
        net = net.scaled(args.scale_caps)
    if args.dry_run:
        print("inputs valid")
        return EXIT_OK
    t0 = time.perf_counter()
    modes = quantize(net)
    outdir = _outdir(args)
    doc = {
        "E_C_theta_MHz": modes.E_C_theta * 1e3,
        "E_C_phi_GHz": modes.E_C_phi,
        "E_C_zeta_GHz": modes.E_C_zeta,
        "g_phi_theta_GHz": modes.g_phi_theta,
        "omega_zeta_MHz": modes.omega_zeta * 1e3,
        "beta_phi": modes.beta_phi,
        "beta_theta": modes.beta_theta,
    }
    with open(outdir / "mode_energies.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    _write_manifest(outdir, args, [Path(args.network)],
                    {"quantize": time.perf_counter() - t0})
    print(f"wrote {outdir / 'mode_energies.json'}")
    return EXIT_OK


def _solve_grid(p, axis, grid, dng, k, basis, workers):
    """Solve every sweep point (thread pool), then order eigenstates by
    overlap continuity along the grid."""
    def job(x):
        q = p.replace(flux=x, n_g=p.n_g + dng) if axis == "flux" \
            else p.replace(n_g=x + dng)
        return solve(q, basis, k)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        spectra = list(ex.map(job, grid))
    tracked = []
    prev = None
    for s in spectra:
        if prev is not None:
            order = _track_order(prev, s.vectors)
            s = Spectrum(energies=s.energies[order], vectors=s.vectors[:, order],
                         params=s.params, basis=s.basis)
        prev = s.vectors
        tracked.append(s)
    return tracked


def cmd_spectrum(args) -> int:
    p = params_from_dict(_load_json(args.params))
    if args.axis not in ("flux", "charge"):
        raise InputError("--axis must be flux or charge")
    if args.points < 1:
        raise InputError("--points must be >= 1")
    lo, hi = args.range
    grid = np.linspace(lo, hi, args.points)
    if args.dry_run:
        print("inputs valid")
        return EXIT_OK
    t0 = time.perf_counter()
    basis = BasisConfig(args.n_theta_max, args.n_phi_max)
    branches = {"even": 0.0}
    if args.parity_branches:
        branches["odd"] = 0.5
    rows = []
    axis_col = "flux_phi0" if args.axis == "flux" else "ng"
    for tag, dng in branches.items():
        spectra = _solve_grid(p, args.axis, grid, dng, args.k, basis, args.workers)
        for x, s in zip(grid, spectra):
            for t in transition_table(s, k=args.k):
                rows.append([tag, float(x), t.i, t.j, float(t.frequency),
                             abs(t.me_theta), abs(t.me_phi)])
    outdir = _outdir(args)
    _write_csv(
        outdir / "spectrum.csv",
        [ "branch", axis_col, "from_index", "to_index", "freq_ghz",
          "me_theta_abs", "me_phi_abs"],
        rows,
    )
    _write_manifest(outdir, args, [Path(args.params)],
                    {"sweep": time.perf_counter() - t0})
    print(f"wrote {outdir / 'spectrum.csv'} ({len(rows)} rows)")
    if args.plot:
        _render(outdir)
    return EXIT_OK


def cmd_wannier(args) -> int:
    p = params_from_dict(_load_json(args.params))
    if any(b < 0 for b in args.band):
        raise InputError("--band indices must be non-negative")
    if args.dry_run:
        print("inputs valid")
        return EXIT_OK
    t0 = time.perf_counter()
    outdir = _outdir(args)
    ng_grid = np.linspace(0.0, 1.0, args.ng_points, endpoint=False)
    report = {"bands": {}}
    for band in args.band:
        from .tightbinding import bloch_states

        family = bloch_states(p, band, ng_grid)
        w = recenter_valley(wannier_function(family, tail_tol=args.tail_tol))
        energies = band_dispersion(p, band, ng_grid)
        t_disp = hopping_integral(p, band)
        theta, phi = np.meshgrid(w.theta, w.phi, indexing="ij")
        _write_csv(
            outdir / f"wannier_band{band}.csv",
            ["theta", "phi", "re", "im", "probability"],
            zip(
                theta.ravel().tolist(),
                phi.ravel().tolist(),
                np.real(w.values).ravel().tolist(),
                np.imag(w.values).ravel().tolist(),
                (np.abs(w.values) ** 2).ravel().tolist(),
            ),
        )
        _write_csv(
            outdir / f"bloch_dispersion_band{band}.csv",
            ["ng", "energy_ghz"],
            zip(ng_grid.tolist(), energies.tolist()),
        )
        report["bands"][str(band)] = {
            "hopping_t_GHz": float(t_disp),
            "mean_energy_GHz": float(np.mean(energies)),
            "dispersion_ptp_GHz": float(np.ptp(energies)),
            "participation_width_rad": float(participation_width(w)),
        }
    if len(args.band) == 2:
        t0_, t1_ = (report["bands"][str(b)]["hopping_t_GHz"] for b in args.band)
        hi, lo_ = max(abs(t0_), abs(t1_)), min(abs(t0_), abs(t1_))
        report["hopping_ratio_min_over_max"] = lo_ / hi if hi else 0.0
    with open(outdir / "wannier_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    _write_manifest(outdir, args, [Path(args.params)],
                    {"wannier": time.perf_counter() - t0})
    print(f"wrote {outdir / 'wannier_report.json'}")
    if args.plot:
        _render(outdir)
    return EXIT_OK


def _system_from_doc(doc: dict) -> LambdaSystem:
    fields = _strip_units(doc)
    # level splittings arrive in GHz; decay rates in 1/us
    try:
        return LambdaSystem(
            omega_1=TWO_PI * 1e3 * fields["omega_1"],
            omega_2=TWO_PI * 1e3 * fields["omega_2"],
            **{
                k: fields.get(k, 0.0)
                for k in ("Gamma_10", "Gamma_12", "Gamma_1_phi",
                          "Gamma_20", "Gamma_2_phi")
            },
        )
    except (KeyError, ValueError) as exc:
        raise InputError(f"invalid Lambda system: {exc}") from exc


def _pulses_from_doc(pulses: list) -> PulseSchedule:
    out = []
    for i, doc in enumerate(pulses):
        fields = _strip_units(doc)
        if "amplitude" in fields:
            fields["amplitude"] = TWO_PI * 1e3 * fields["amplitude"]  # GHz -> rad/us
        try:
            out.append(Pulse(**fields))
        except (TypeError, ValueError) as exc:
            raise InputError(f"pulse {i}: {exc}") from exc
    return PulseSchedule(out)


def cmd_raman(args) -> int:
    doc = _load_json(args.schedule)
    if "system" not in doc:
        raise InputError("schedule must contain a 'system' object")
    system = _system_from_doc(doc["system"])
    delta = TWO_PI * doc.get("Delta_MHz", 0.0)
    weights = tuple(doc.get("signal_weights", (0.0, 1.0)))
    if len(weights) != 2:
        raise InputError("signal_weights must be a (w0, w2) pair")
    mode = ("sequence" if "sequence" in doc
            else "amplitude_map" if "amplitude_map" in doc
            else "trajectory")
    if mode == "trajectory" and "pulses" not in doc:
        raise InputError("schedule must contain pulses, sequence or amplitude_map")
    if args.dry_run:
        if mode == "trajectory":
            _pulses_from_doc(doc["pulses"])
        print("inputs valid")
        return EXIT_OK
    t0 = time.perf_counter()
    outdir = _outdir(args)

    if mode == "trajectory":
        sched = _pulses_from_doc(doc["pulses"])
        t_max = doc.get("t_max_us", sched.t_end)
        t_grid = np.linspace(0.0, t_max, int(doc.get("points", 401)))
        traj = lindblad_evolve(system, sched, delta, t_grid,
                               signal_weights=weights)
        pops = traj.populations
        _write_csv(outdir / "trajectory.csv",
                   ["time_us", "p0", "p1", "p2", "signal"],
                   zip(t_grid.tolist(), pops[:, 0].tolist(), pops[:, 1].tolist(),
                       pops[:, 2].tolist(), traj.signal.tolist()))
        written = "trajectory.csv"
    elif mode == "sequence":
        seq = doc["sequence"]
        try:
            kind = seq["kind"]
            x_grid = np.asarray(seq["x_grid"], dtype=float)
            sigma = seq["sigma_us"]
        except KeyError as exc:
            raise InputError(f"sequence config missing {exc}") from exc
        if kind in ("rabi_amplitude",):
            x_grid = TWO_PI * 1e3 * x_grid  # GHz amplitudes -> rad/us
        if kind in ("rabi_detuning",):
            x_grid = TWO_PI * x_grid  # MHz detunings -> rad/us
        result = simulate_sequence(
            kind, system, delta, sigma, x_grid,
            calibrate=bool(seq.get("calibrate", False)),
            fringe_rate=TWO_PI * seq.get("fringe_rate_MHz", 0.0),
        )
        xcol = {"t1": "delay_us", "ramsey": "delay_us", "echo": "delay_us",
                "rabi_amplitude": "amplitude_rad_per_us",
                "rabi_detuning": "detuning_rad_per_us"}[kind]
        _write_csv(outdir / f"sequence_{kind}.csv", [xcol, "signal"],
                   zip(result.x.tolist(), result.signal.tolist()))
        written = f"sequence_{kind}.csv"
    else:
        amap = doc["amplitude_map"]
        try:
            a_grid = TWO_PI * np.asarray(amap["alpha_MHz"], dtype=float)
            b_grid = TWO_PI * np.asarray(amap["beta_MHz"], dtype=float)
            sigma = amap["sigma_us"]
        except KeyError as exc:
            raise InputError(f"amplitude_map config missing {exc}") from exc
        rows = []
        for oa in a_grid:
            for ob in b_grid:
                sched = PulseSchedule([
                    Pulse(drive="alpha", amplitude=oa, center=2 * sigma,
                          sigma=sigma),
                    Pulse(drive="beta", amplitude=ob, center=2 * sigma,
                          sigma=sigma),
                ])
                traj = lindblad_evolve(
                    system, sched, delta, np.array([0.0, 4.0 * sigma]),
                    signal_weights=weights)
                rows.append([float(oa / TWO_PI), float(ob / TWO_PI),
                             float(traj.populations[-1, 2]),
                             float(traj.signal[-1])])
        _write_csv(outdir / "amplitude_map.csv",
                   ["alpha_MHz", "beta_MHz", "p2", "signal"], rows)
        written = "amplitude_map.csv"
    _write_manifest(outdir, args, [Path(args.schedule)],
                    {"raman": time.perf_counter() - t0})
    print(f"wrote {outdir / written}")
    if args.plot:
        _render(outdir)
    return EXIT_OK


def cmd_fit(args) -> int:
    init_doc = _load_json(args.init)
    if "params" not in init_doc:
        raise InputError("init file must contain a 'params' object")
    initial = params_from_dict(init_doc["params"])
    res_doc = _strip_units(init_doc.get("resonator", {}))
    try:
        resonator = ResonatorParams(
            f_r=res_doc.get("f_r", 7.35),
            Z_r=res_doc.get("Z_r", 50.0),
            n_photon_max=int(res_doc.get("n_photon_max", 1)),
        )
    except ValueError as exc:
        raise InputError(f"invalid resonator: {exc}") from exc
    datasets = [load_dataset(p) for p in args.datasets]
    if args.dry_run:
        print("inputs valid")
        return EXIT_OK
    t0 = time.perf_counter()
    bounds = {
        name: tuple(v)
        for name, v in init_doc.get("bounds", {}).items()
        if name in PARAM_NAMES
    }
    problem = FitProblem(
        initial=initial,
        resonator=resonator,
        bounds=bounds,
        basis=BasisConfig(args.n_theta_max, args.n_phi_max),
        maxiter=args.maxiter,
        restarts=args.restarts,
    )
    try:
        result = fit_spectrum(problem, datasets)
    except FitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    outdir = _outdir(args)
    result.to_json(outdir / "fit_result.json")
    _write_manifest(outdir, args, [Path(args.init), *map(Path, args.datasets)],
                    {"fit": time.perf_counter() - t0})
    print(f"wrote {outdir / 'fit_result.json'} "
          f"(metric {result.metric:.3e}, {result.n_evaluations} evaluations)")
    if args.plot:
        _render(outdir)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _render(outdir: Path):
    from .plots import render_run

    for fig in render_run(outdir):
        print(f"rendered {fig}")


def cmd_report(args) -> int:
    outdir = Path(args.run_dir)
    if not outdir.is_dir():
        raise InputError(f"run directory not found: {outdir}")
    if args.dry_run:
        print("inputs valid")
        return EXIT_OK
    _render(outdir)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zeropi",
        description="0-pi qubit modeling: quantization, spectra, Wannier "
                    "analysis, Raman dynamics and spectrum fitting.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("-o", "--output", default="run",
                        help="output directory (default: ./run)")
        sp.add_argument("--dry-run", action="store_true",
                        help="validate inputs without computing")
        sp.add_argument("--plot", action="store_true",
                        help="render figures next to the delimited outputs")
        sp.add_argument("--seed", type=int, default=0, help="random seed")
        sp.add_argument("--workers", type=int, default=1,
                        help="worker threads for sweep points")

    sp = sub.add_parser("quantize", help="capacitance network -> mode energies")
    sp.add_argument("network", help="capacitance network JSON")
    sp.add_argument("--scale-caps", type=float, default=1.0,
                    help="multiply every capacitance by this factor")
    common(sp)
    sp.set_defaults(func=cmd_quantize)

    sp = sub.add_parser("spectrum", help="transition-frequency sweep -> CSV")
    sp.add_argument("params", help="Hamiltonian parameters JSON")
    sp.add_argument("--axis", default="flux", help="flux or charge")
    sp.add_argument("--points", type=int, default=41)
    sp.add_argument("--range", type=float, nargs=2, default=(0.0, 0.5),
                    metavar=("LO", "HI"))
    sp.add_argument("--parity-branches", action="store_true",
                    help="add the n_g + 1/2 quasiparticle branch")
    sp.add_argument("--k", type=int, default=12, help="eigenstates per point")
    sp.add_argument("--n-theta-max", type=int, default=10)
    sp.add_argument("--n-phi-max", type=int, default=40)
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("wannier", help="Bloch/Wannier band analysis")
    sp.add_argument("params", help="Hamiltonian parameters JSON")
    sp.add_argument("--band", type=int, nargs="+", required=True)
    sp.add_argument("--ng-points", type=int, default=64)
    sp.add_argument("--tail-tol", type=float, default=0.1)
    common(sp)
    sp.set_defaults(func=cmd_wannier)

    sp = sub.add_parser("raman", help="Lambda-system dynamics from a schedule")
    sp.add_argument("schedule", help="schedule JSON")
    common(sp)
    sp.set_defaults(func=cmd_raman)

    sp = sub.add_parser("fit", help="multivariate fit to spectroscopy CSVs")
    sp.add_argument("datasets", nargs="+", help="spectroscopy CSV files")
    sp.add_argument("--init", required=True, help="initial parameters JSON")
    sp.add_argument("--maxiter", type=int, default=4000)
    sp.add_argument("--restarts", type=int, default=2)
    sp.add_argument("--n-theta-max", type=int, default=6)
    sp.add_argument("--n-phi-max", type=int, default=16)
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("report", help="render figures for an existing run")
    sp.add_argument("run_dir")
    common(sp)
    sp.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CircuitError, FitError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RamanError, TightBindingError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
