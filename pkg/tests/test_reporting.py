from __future__ import annotations

import pytest

from lib.reporting import ReportGenerator


def test_experiment_summary_lists_sizes_and_fits() -> None:
    report = {
        "kind": "locallaw",
        "parameters": {"sizes": [100, 200], "replicas": 2, "seed": 0},
        "results": {
            "energy": 0.75,
            "perSize": [
                {"N": 100, "maxErr": 0.031, "avgErr": 0.004},
                {"N": 200, "maxErr": 0.022, "avgErr": 0.002},
            ],
            "entrywiseFit": {"slope": -0.49, "intercept": 0.1, "stderr": 0.02, "points": 6},
            "averagedFit": {"slope": -0.98, "intercept": 0.3, "stderr": 0.03, "points": 6},
            "targets": {"entrywise": -0.5, "averaged": -1.0},
        },
        "timing": {"wallClockSeconds": 1.25},
    }

    text = ReportGenerator().experiment_summary(report)

    assert text.startswith("# Experiment: locallaw")
    assert "| N | maxErr | avgErr |" in text
    assert "3.100e-02" in text
    assert "| entrywiseFit | -0.490 |" in text
    assert "entrywise -0.5, averaged -1.0" in text
    assert "Wall clock: 1.25 s" in text


def test_experiment_summary_reports_schur_check() -> None:
    report = {
        "kind": "schur",
        "parameters": {"sizes": [10]},
        "results": {"perSize": [{"N": 10, "maxRelErr": 1e-14}], "maxRelErr": 1e-14, "pass": True},
        "timing": {},
    }

    text = ReportGenerator().experiment_summary(report)

    assert "Schur identity check: pass" in text
    assert "Wall clock: 0.00 s" in text


def test_stability_summary_shows_bulk_and_failures() -> None:
    report = {
        "kappa": 0.05,
        "pass": False,
        "supMNorm": 1.2,
        "supLinvNorm": 3.4,
        "growthConstant": 0.01,
        "threshold": None,
        "minSigma": 7e-4,
        "sigmaFloor": 1e-3,
        "failures": 1,
        "bulkIntervals": [[-1.0, 2.5]],
        "rows": [
            {"E": 0.5, "eta": 0.1, "MNorm": 1.2},
            {"E": 1.5, "eta": 1e-6, "error": "ConvergenceError: budget exhausted"},
        ],
    }

    text = ReportGenerator().stability_summary(report)

    assert "Result: **FAIL**" in text
    assert "- [-1, 2.5]" in text
    assert "| threshold | n/a |" in text
    assert "| min σ_min | 7.000e-04 |" in text
    assert "| σ_min floor | 1.000e-03 |" in text
    assert "ConvergenceError: budget exhausted" in text


def test_missing_template_directory_is_rejected(tmp_path) -> None:
    with pytest.raises(ValueError, match="Templates directory not found"):
        ReportGenerator(tmp_path / "missing")


def test_missing_template_is_rejected(tmp_path) -> None:
    with pytest.raises(ValueError, match="Report template not found"):
        ReportGenerator(tmp_path)
