import json

import numpy as np
import pytest

from zeropi.cli import main

NETWORK = {
    "C_fF": 100.5,
    "C_J_fF": 2.0,
    "C_L_x_fF": 0.7,
    "C_J_x_fF": 1.0,
    "C_r": [9.1, 0.3, 3.8, 0.3],
    "C_0": [8.2, 7.9, 6.2, 11.6],
    "E_J_GHz": 6.013,
    "E_L_GHz": 0.38,
}

PARAMS = {
    "E_C_phi_GHz": 1.142,
    "E_C_theta_GHz": 0.092,
    "E_J_GHz": 6.013,
    "E_L_GHz": 0.377,
    "dE_J": 0.1,
}

SCHEDULE = {
    "system": {
        "omega_1_GHz": 5.0,
        "omega_2_GHz": 0.1,
        "Gamma_10_per_us": 0.0063,
        "Gamma_12_per_us": 0.0063,
        "Gamma_1_phi_per_us": 0.0314,
    },
    "Delta_MHz": 3.0,
    "pulses": [
        {"drive": "alpha", "amplitude_MHz": 5.0, "center_us": 2.0,
         "sigma_us": 1.0},
        {"drive": "beta", "amplitude_MHz": 5.0, "center_us": 2.0,
         "sigma_us": 1.0},
    ],
    "t_max_us": 8.0,
    "points": 101,
}


@pytest.fixture
def network_file(tmp_path):
    path = tmp_path / "network.json"
    path.write_text(json.dumps(NETWORK))
    return path


@pytest.fixture
def params_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(PARAMS))
    return path


@pytest.fixture
def schedule_file(tmp_path):
    path = tmp_path / "schedule.json"
    path.write_text(json.dumps(SCHEDULE))
    return path


def test_quantize_golden(network_file, tmp_path):
    out = tmp_path / "run"
    assert main(["quantize", str(network_file), "-o", str(out)]) == 0
    doc = json.loads((out / "mode_energies.json").read_text())
    assert doc["E_C_theta_MHz"] == pytest.approx(88.0, rel=0.05)
    assert doc["omega_zeta_MHz"] == pytest.approx(742.0, rel=0.05)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "quantize"
    assert "config_hash" in manifest


def test_quantize_missing_field(tmp_path, capsys):
    path = tmp_path / "net.json"
    path.write_text(json.dumps({"C_fF": 100.0, "C_J_fF": 2.0, "E_L_GHz": 0.38}))
    assert main(["quantize", str(path)]) == 2
    assert "E_J" in capsys.readouterr().err


def test_quantize_missing_file():
    assert main(["quantize", "/nonexistent/net.json"]) == 2


def test_quantize_scale_caps(network_file, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["quantize", str(network_file), "-o", str(out1)])
    main(["quantize", str(network_file), "--scale-caps", "2.0", "-o", str(out2)])
    d1 = json.loads((out1 / "mode_energies.json").read_text())
    d2 = json.loads((out2 / "mode_energies.json").read_text())
    assert d2["E_C_theta_MHz"] == pytest.approx(d1["E_C_theta_MHz"] / 2)
    assert d2["E_C_phi_GHz"] == pytest.approx(d1["E_C_phi_GHz"] / 2)


def test_spectrum_single_point(params_file, tmp_path):
    out = tmp_path / "run"
    code = main([
        "spectrum", str(params_file), "--points", "1", "--k", "6",
        "--n-theta-max", "5", "--n-phi-max", "12", "-o", str(out),
    ])
    assert code == 0
    lines = (out / "spectrum.csv").read_text().strip().splitlines()
    assert lines[0].startswith("branch,flux_phi0")
    assert len(lines) == 1 + 5  # header + transitions from the ground state


def test_spectrum_charge_axis_branches(params_file, tmp_path):
    out = tmp_path / "run"
    code = main([
        "spectrum", str(params_file), "--axis", "charge", "--points", "3",
        "--range", "0.0", "0.5", "--parity-branches", "--k", "4",
        "--n-theta-max", "5", "--n-phi-max", "12", "-o", str(out),
    ])
    assert code == 0
    body = (out / "spectrum.csv").read_text()
    assert "even," in body and "odd," in body


def test_spectrum_bad_axis(params_file):
    assert main(["spectrum", str(params_file), "--axis", "bogus"]) == 2


def test_dry_run_all_subcommands(network_file, params_file, schedule_file):
    assert main(["quantize", str(network_file), "--dry-run"]) == 0
    assert main(["spectrum", str(params_file), "--dry-run"]) == 0
    assert main(["raman", str(schedule_file), "--dry-run"]) == 0
    assert main(["wannier", str(params_file), "--band", "0", "--dry-run"]) == 0


def test_raman_trajectory(schedule_file, tmp_path):
    out = tmp_path / "run"
    assert main(["raman", str(schedule_file), "-o", str(out)]) == 0
    lines = (out / "trajectory.csv").read_text().strip().splitlines()
    assert lines[0] == "time_us,p0,p1,p2,signal"
    assert len(lines) == 1 + 101


def test_raman_amplitude_map_peaks_on_diagonal(tmp_path):
    doc = {
        "system": SCHEDULE["system"],
        "Delta_MHz": 20.0,
        "amplitude_map": {
            "alpha_MHz": [1.0, 3.45, 6.0],
            "beta_MHz": [1.0, 3.45, 6.0],
            "sigma_us": 1.0,
        },
    }
    path = tmp_path / "map.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "run"
    assert main(["raman", str(path), "-o", str(out)]) == 0
    rows = np.genfromtxt(out / "amplitude_map.csv", delimiter=",", names=True)
    # maximum transfer on the equal-amplitude diagonal
    best = rows[np.argmax(rows["p2"])]
    assert best["alpha_MHz"] == best["beta_MHz"]


def test_raman_sequence(tmp_path):
    doc = {
        "system": dict(SCHEDULE["system"], Gamma_20_per_us=0.002,
                       Gamma_10_per_us=0.0, Gamma_12_per_us=0.0,
                       Gamma_1_phi_per_us=0.0),
        "Delta_MHz": 20.0,
        "sequence": {"kind": "t1", "sigma_us": 1.0,
                     "x_grid": [1.0, 300.0, 600.0, 900.0]},
    }
    path = tmp_path / "seq.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "run"
    assert main(["raman", str(path), "-o", str(out)]) == 0
    rows = np.genfromtxt(out / "sequence_t1.csv", delimiter=",", names=True)
    assert np.all(np.diff(rows["signal"]) < 0)  # monotone decay


def test_raman_invalid_schedule(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"Delta_MHz": 3.0}))
    assert main(["raman", str(path)]) == 2


def test_determinism_byte_identical(params_file, schedule_file, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        main([
            "spectrum", str(params_file), "--points", "3", "--k", "5",
            "--n-theta-max", "5", "--n-phi-max", "12",
            "--seed", "7", "-o", str(out),
        ])
        main(["raman", str(schedule_file), "--seed", "7", "-o", str(out)])
        outs.append(out)
    a, b = outs
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_report_renders_figures(schedule_file, tmp_path):
    out = tmp_path / "run"
    main(["raman", str(schedule_file), "-o", str(out)])
    assert main(["report", str(out)]) == 0
    assert (out / "trajectory.png").exists()


def test_report_missing_dir():
    assert main(["report", "/nonexistent/run"]) == 2


def test_plot_flag_renders(params_file, tmp_path):
    out = tmp_path / "run"
    main([
        "spectrum", str(params_file), "--points", "3", "--k", "5",
        "--n-theta-max", "5", "--n-phi-max", "12", "-o", str(out), "--plot",
    ])
    assert (out / "spectrum.png").exists()


def test_fit_cli_smoke(tmp_path):
    # tiny labeled synthetic problem, few iterations: exercises the whole
    # path without demanding convergence
    from zeropi.fitting import generate_synthetic_dataset
    from zeropi.hamiltonian import BasisConfig, DEVICE_PARAMS
    from zeropi.spectroscopy import ResonatorParams

    truth = DEVICE_PARAMS.replace(g_phi_theta=0.0)
    basis = BasisConfig(5, 12)
    ds = generate_synthetic_dataset(
        truth, ResonatorParams(n_photon_max=1), [0.0, 0.2], 0.0, basis=basis
    )
    data = tmp_path / "scan.csv"
    ds.to_csv(data)
    init = tmp_path / "init.json"
    init.write_text(json.dumps({
        "params": dict(PARAMS, beta_phi=0.27, beta_theta=0.0066),
    }))
    out = tmp_path / "run"
    code = main([
        "fit", str(data), "--init", str(init), "--maxiter", "5",
        "--restarts", "0", "--n-theta-max", "5", "--n-phi-max", "12",
        "-o", str(out),
    ])
    assert code in (0, 4)
    doc = json.loads((out / "fit_result.json").read_text())
    assert set(doc["params"]) == {
        "E_C_phi", "E_C_theta", "E_J", "E_L", "dE_J", "beta_phi", "beta_theta"
    }
    trace = doc["best_metric_trace"]
    assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def test_wannier_cli(tmp_path):
    params = {
        "E_C_theta_GHz": 0.1, "E_C_phi_GHz": 1.0, "E_J_GHz": 5.0,
        "E_L_GHz": 0.4,
    }
    path = tmp_path / "p.json"
    path.write_text(json.dumps(params))
    out = tmp_path / "run"
    code = main([
        "wannier", str(path), "--band", "0", "--ng-points", "16",
        "-o", str(out), "--plot",
    ])
    assert code == 0
    report = json.loads((out / "wannier_report.json").read_text())
    assert "hopping_t_GHz" in report["bands"]["0"]
    assert (out / "wannier_band0.csv").exists()
    assert (out / "wannier_band0.png").exists()
    assert (out / "bloch_dispersion_band0.png").exists()
