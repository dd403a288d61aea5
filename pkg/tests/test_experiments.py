from __future__ import annotations

import numpy as np
import pytest

import lib.experiments as experiments
from lib.errors import ConvergenceError, ExperimentError, ExperimentExecutionFailedError
from lib.dyson import CumulativeDistribution
from lib.experiments import ExperimentParams, eigenvalue_index, fit_loglog, run_experiment
from lib.linearize import product_pencil, product_polynomial


def test_fit_recovers_power_law() -> None:
    x = [10.0, 20.0, 40.0, 80.0]
    y = [3.0 / value for value in x]

    fit = fit_loglog(x, y, "inverse")

    assert fit.slope == pytest.approx(-1.0)
    assert np.exp(fit.intercept) == pytest.approx(3.0)
    assert fit.points == 4


def test_fit_needs_three_positive_points() -> None:
    with pytest.raises(ExperimentError, match="at least 3"):
        fit_loglog([1.0, 2.0, 3.0], [1.0, 0.0, 2.0], "sparse")


def test_schur_experiment_passes(anticommutator_q, anticommutator_pencil) -> None:
    params = ExperimentParams(sizes=(6, 10), replicas=2, seed=3, concurrency=2)

    report = run_experiment("schur", anticommutator_pencil, anticommutator_q, params)

    assert report.kind == "schur"
    assert report.results["pass"] is True
    assert [row["N"] for row in report.results["perSize"]] == [6, 10]
    assert report.parameters["m"] == 9
    assert "wallClockSeconds" in report.timing


def test_speed_experiment_is_deterministic(semicircle_q, semicircle_pencil) -> None:
    params = ExperimentParams(sizes=(10, 20, 40), replicas=2, seed=11)

    first = run_experiment("speed", semicircle_pencil, semicircle_q, params)
    second = run_experiment("speed", semicircle_pencil, semicircle_q, params)

    assert first.results == second.results
    assert first.results["firstMoment"] == pytest.approx(1.0)
    assert first.results["fit"]["points"] == 3


def test_energy_shift_moves_reported_energies(semicircle_q, semicircle_pencil) -> None:
    params = ExperimentParams(sizes=(10, 20, 40), replicas=1, energy_shift=-1.0)

    report = run_experiment("speed", semicircle_pencil, semicircle_q, params)

    assert report.results["firstMoment"] == pytest.approx(0.0)


def test_unknown_kind_is_rejected(semicircle_q, semicircle_pencil) -> None:
    with pytest.raises(ExperimentError, match="Unknown experiment kind"):
        run_experiment("bogus", semicircle_pencil, semicircle_q, ExperimentParams(sizes=(4,), replicas=1))


def test_all_replicas_failing_raises_execution_failure(monkeypatch, semicircle_q, semicircle_pencil) -> None:
    def broken(*args, **kwargs):
        raise RuntimeError("sampler offline")

    monkeypatch.setattr(experiments, "sample_ensemble", broken)
    params = ExperimentParams(sizes=(4,), replicas=2)

    with pytest.raises(ExperimentExecutionFailedError) as excinfo:
        run_experiment("schur", semicircle_pencil, semicircle_q, params)

    failures = excinfo.value.detail["failures"]
    assert len(failures) == 2
    assert failures[0]["errorType"] == "RuntimeError"


def test_partial_replica_failure_reports_failed_runs(monkeypatch, semicircle_q, semicircle_pencil) -> None:
    original = experiments.sample_ensemble

    def flaky(cfg, alpha_star, beta_star, replica=0, point=0):
        if replica == 1:
            raise RuntimeError("replica 1 lost")
        return original(cfg, alpha_star, beta_star, replica, point)

    monkeypatch.setattr(experiments, "sample_ensemble", flaky)
    params = ExperimentParams(sizes=(4,), replicas=3)

    with pytest.raises(ExperimentError) as excinfo:
        run_experiment("schur", semicircle_pencil, semicircle_q, params)

    assert not isinstance(excinfo.value, ExperimentExecutionFailedError)
    assert [failure["replica"] for failure in excinfo.value.detail["failures"]] == [1]


def test_common_numerical_cause_is_reported(monkeypatch, semicircle_q, semicircle_pencil) -> None:
    def diverging(*args, **kwargs):
        raise ConvergenceError("Iteration budget exhausted.")

    monkeypatch.setattr(experiments, "sample_ensemble", diverging)

    with pytest.raises(ExperimentExecutionFailedError) as excinfo:
        run_experiment("schur", semicircle_pencil, semicircle_q, ExperimentParams(sizes=(4,), replicas=2))

    assert excinfo.value.detail["commonCause"] == "ConvergenceError"


def test_eigenvalue_index_rounds_up_and_clips() -> None:
    distribution = CumulativeDistribution(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 1.0)

    assert eigenvalue_index(distribution, 0.25, 10) == 3
    assert eigenvalue_index(distribution, 0.3, 10) == 3
    assert eigenvalue_index(distribution, -1.0, 10) == 1
    assert eigenvalue_index(distribution, 2.0, 10) == 10


def test_locallaw_slopes_on_semicircle(semicircle_q, semicircle_pencil) -> None:
    params = ExperimentParams(sizes=(400,), replicas=3, seed=5, dos_resolution=201)

    report = run_experiment("locallaw", semicircle_pencil, semicircle_q, params)

    assert report.results["E"] == pytest.approx(1.0, abs=0.05)
    assert -0.75 <= report.results["entrywiseFit"]["slope"] <= -0.3
    assert -1.4 <= report.results["averagedFit"]["slope"] <= -0.6
    assert len(report.raw_rows) == 3 * params.n_etas


def test_rigidity_on_product_model_is_order_one_over_n() -> None:
    params = ExperimentParams(sizes=(300,), replicas=2, seed=2, energy_points=5, dos_resolution=201)

    report = run_experiment("rigidity", product_pencil(1), product_polynomial(1), params)

    assert len(report.results["energies"]) == 5
    assert all(-3.0 < e < 1.0 for e in report.results["energies"])
    row = report.results["perSize"][0]
    assert row["medianErr"] <= 20 / 300


def test_deloc_eigenvectors_are_spread_out(semicircle_q, semicircle_pencil) -> None:
    N = 300
    params = ExperimentParams(sizes=(N,), replicas=2, seed=8, energy_points=4, dos_resolution=201)

    report = run_experiment("deloc", semicircle_pencil, semicircle_q, params)

    row = report.results["perSize"][0]
    scale = np.sqrt(np.log(N) / N)
    assert row["reference"] == pytest.approx(10 * scale)
    assert row["medianSupNorm"] <= row["reference"]
    assert row["medianOverlap"] <= row["reference"]
    assert row["medianSupNorm"] <= 3 * scale
    assert row["medianOverlap"] <= 3 * scale


def test_globaldos_matches_product_model_histogram() -> None:
    params = ExperimentParams(sizes=(300,), replicas=2, seed=4, bins=10)

    report = run_experiment("globaldos", product_pencil(1), product_polynomial(1), params)

    assert report.results["mass"] == pytest.approx(1.0, abs=5e-3)
    assert report.results["meanEnergy"] == pytest.approx(0.0, abs=1e-12)
    assert sum(report.results["expectedDensity"]) * np.diff(report.results["binEdges"])[0] == pytest.approx(1.0, abs=5e-3)
    row = report.results["perSize"][0]
    assert row["outsideRange"] == 0
    assert row["supBinDiscrepancy"] < 0.1
