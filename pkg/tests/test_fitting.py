import numpy as np
import pytest

from zeropi.hamiltonian import BasisConfig, DEVICE_PARAMS
from zeropi.spectroscopy import ResonatorParams
from zeropi.fitting import (
    FitError,
    FitPoint,
    FitProblem,
    PARAM_NAMES,
    SpectroscopyDataset,
    generate_synthetic_dataset,
    load_dataset,
    model_transitions,
    residuals,
)

TRUTH = DEVICE_PARAMS.replace(g_phi_theta=0.0)
RES = ResonatorParams(n_photon_max=1)
BASIS = BasisConfig(n_theta_max=5, n_phi_max=12)
FLUX = np.linspace(0.0, 0.4, 4)


@pytest.fixture(scope="module")
def synthetic():
    return [
        generate_synthetic_dataset(TRUTH, RES, FLUX, 0.0, basis=BASIS),
        generate_synthetic_dataset(TRUTH, RES, FLUX, 0.25, basis=BASIS),
    ]


@pytest.fixture(scope="module")
def problem():
    return FitProblem(initial=TRUTH, resonator=RES, basis=BASIS, workers=1)


def test_point_validation():
    with pytest.raises(FitError):
        FitPoint(flux=0.0, n_g=0.0, freq_ghz=-1.0)
    with pytest.raises(FitError):
        FitPoint(flux=np.inf, n_g=0.0, freq_ghz=1.0)
    with pytest.raises(FitError):
        FitPoint(flux=0.0, n_g=0.0, freq_ghz=1.0, weight=-1.0)
    with pytest.raises(FitError):
        FitPoint(flux=0.0, n_g=0.0, freq_ghz=1.0, to_label="q1p0")


def test_empty_dataset_rejected():
    with pytest.raises(FitError):
        SpectroscopyDataset(points=[])


def test_csv_round_trip(tmp_path, synthetic):
    path = tmp_path / "scan.csv"
    synthetic[0].to_csv(path)
    clone = load_dataset(path)
    assert len(clone.points) == len(synthetic[0].points)
    assert clone.has_labels
    assert clone.points[0] == synthetic[0].points[0]


def test_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "flux_phi0,ng,freq_ghz,weight,from_label,to_label\n"
        "0.0,0.0,5.0,1.0,,\n"
        "0.1,0.0,-2.0,1.0,,\n"
    )
    with pytest.raises(FitError, match="bad.csv:3"):
        load_dataset(path)


def test_missing_columns_rejected(tmp_path):
    path = tmp_path / "cols.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(FitError, match="columns"):
        load_dataset(path)


def test_metric_zero_at_truth(synthetic, problem):
    _, metric, _ = residuals(problem.initial_vector(), synthetic, problem)
    assert metric < 1e-12


def test_metric_increases_away_from_truth(synthetic, problem):
    x = problem.initial_vector()
    x[PARAM_NAMES.index("E_J")] *= 1.05
    _, metric, _ = residuals(x, synthetic, problem)
    assert metric > 1e-3


def test_metric_permutation_invariant(synthetic, problem):
    _, m1, _ = residuals(problem.initial_vector(), synthetic, problem)
    shuffled = SpectroscopyDataset(points=synthetic[0].points[::-1])
    _, m2, _ = residuals(
        problem.initial_vector(), [shuffled, synthetic[1]], problem
    )
    assert m1 == pytest.approx(m2, abs=1e-15)


def test_zero_weight_point_no_contribution(problem):
    lines = model_transitions(TRUTH, RES, 0.1, 0.0, basis=BASIS)
    label = "q1p0"
    good = FitPoint(0.1, 0.0, lines[label], from_label="q0p0", to_label=label)
    bad = FitPoint(0.1, 0.0, lines[label] + 0.3, weight=0.0,
                   from_label="q0p0", to_label=label)
    ds = SpectroscopyDataset(points=[good, bad])
    _, metric, _ = residuals(problem.initial_vector(), [ds], problem)
    assert metric < 1e-12


def test_unlabeled_assignment_matches_generator(problem):
    lines = model_transitions(TRUTH, RES, 0.2, 0.25, basis=BASIS)
    labels = [f"q{i}p0" for i in range(1, 6)]
    pts = [FitPoint(0.2, 0.25, lines[l]) for l in labels]
    ds = SpectroscopyDataset(points=pts)
    _, metric, assignment = residuals(problem.initial_vector(), [ds], problem)
    assert metric < 1e-12
    assert assignment == labels


def test_far_unlabeled_point_penalized(problem):
    ds = SpectroscopyDataset(points=[FitPoint(0.0, 0.0, 60.0)])
    res, _, assignment = residuals(problem.initial_vector(), [ds], problem)
    assert assignment == [None]
    assert res[0] == pytest.approx(problem.assignment_window)


def test_bounds_validation():
    with pytest.raises(FitError, match="bounds"):
        FitProblem(
            initial=TRUTH, resonator=RES,
            bounds={"E_J": (10.0, 5.0)},
        ).bound_arrays()
    with pytest.raises(FitError, match="within bounds"):
        FitProblem(
            initial=TRUTH, resonator=RES,
            bounds={"E_J": (10.0, 12.0)},
        ).bound_arrays()


def test_g_fixed_to_zero_by_default(problem):
    p = problem.params_at(problem.initial_vector())
    assert p.g_phi_theta == 0.0


def test_dataset_resonator_override(problem):
    # a scan generated through a different readout resonator must be
    # compared against the model evaluated with that resonator
    other = ResonatorParams(f_r=2.49, n_photon_max=1)
    ds = generate_synthetic_dataset(TRUTH, other, [0.0], 0.0, basis=BASIS)
    assert ds.resonator == other
    _, metric, _ = residuals(problem.initial_vector(), [ds], problem)
    assert metric < 1e-12
    stripped = SpectroscopyDataset(points=ds.points)
    _, metric_wrong, _ = residuals(problem.initial_vector(), [stripped], problem)
    assert metric_wrong > 1e-6


def test_generator_rejects_unknown_label():
    with pytest.raises(FitError, match="absent"):
        generate_synthetic_dataset(
            TRUTH, RES, [0.0], 0.0, labels=["q99p0"], basis=BASIS
        )
