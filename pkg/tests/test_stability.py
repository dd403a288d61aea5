from __future__ import annotations

import math

import pytest

from lib.errors import UsageError
from lib.linearize import product_pencil
from lib.stability import SIGMA_MIN_FLOOR, StabilityReport, StabilityRow, assess_M1_M2, bulk_intervals, detect_bulk


def test_bulk_intervals_are_maximal_runs() -> None:
    energies = [0.0, 1.0, 2.0, 3.0, 4.0]
    rho = [0.0, 0.5, 0.5, 0.0, 0.5]

    assert bulk_intervals(energies, rho, 0.1) == [(1.0, 2.0), (4.0, 4.0)]
    assert bulk_intervals(energies, rho, 0.6) == []


def test_semicircle_bulk_is_inside_support(semicircle_pencil) -> None:
    intervals = detect_bulk(semicircle_pencil, 0.1, (-1.5, 3.5), resolution=51)

    assert len(intervals) == 1
    lo, hi = intervals[0]
    assert -1.0 < lo < 0.0
    assert 2.0 < hi < 3.0


def test_detect_bulk_rejects_bad_arguments(semicircle_pencil) -> None:
    with pytest.raises(UsageError):
        detect_bulk(semicircle_pencil, 0.0, (-1.0, 3.0))
    with pytest.raises(UsageError):
        detect_bulk(semicircle_pencil, 0.1, (3.0, -1.0))


def test_semicircle_passes_boundedness_checks(semicircle_pencil) -> None:
    report = assess_M1_M2(
        semicircle_pencil,
        0.1,
        (-1.0, 3.0),
        eta_grid=[1e-3, 1.0, 100.0],
        resolution=21,
        threshold=100.0,
        bulk_samples=3,
    )

    assert report.passed
    assert report.failures == 0
    assert len(report.rows) == 9
    assert 0 < report.sup_M_norm <= 100.0
    assert math.isfinite(report.sup_Linv_norm)


def test_assessment_needs_positive_etas(semicircle_pencil) -> None:
    with pytest.raises(UsageError, match="positive"):
        assess_M1_M2(semicircle_pencil, 0.1, (-1.0, 3.0), eta_grid=[0.0, 1.0])


def test_report_with_failed_rows_does_not_pass() -> None:
    rows = [
        StabilityRow(1.0, 0.1, m_norm=1.0, sigma_min=0.5, trace_ratio=1.0),
        StabilityRow(1.5, 0.1, error="ConvergenceError: budget exhausted"),
    ]

    report = StabilityReport(0.1, [(0.5, 1.5)], rows)
    payload = report.as_dict()

    assert report.failures == 1
    assert not report.passed
    assert payload["pass"] is False
    assert payload["supLinvNorm"] == pytest.approx(2.0)
    assert payload["growthConstant"] == pytest.approx(1.0 / 11.0)
    assert payload["rows"][1]["error"].startswith("ConvergenceError")
    assert set(payload) >= {"kappa", "bulkIntervals", "supMNorm", "threshold", "failures"}


def test_report_below_sigma_floor_does_not_pass() -> None:
    rows = [
        StabilityRow(0.5, 1e-3, m_norm=2.0, sigma_min=0.2, trace_ratio=1.0),
        StabilityRow(0.9, 1e-6, m_norm=9.0, sigma_min=5e-4, trace_ratio=1.0),
    ]

    report = StabilityReport(0.05, [(0.5, 0.9)], rows)

    assert report.sigma_floor == SIGMA_MIN_FLOOR
    assert report.min_sigma == pytest.approx(5e-4)
    assert math.isfinite(report.sup_Linv_norm)
    assert not report.passed
    assert StabilityReport(0.05, [(0.5, 0.9)], rows, sigma_floor=1e-4).passed
    assert report.as_dict()["minSigma"] == pytest.approx(5e-4)


def test_anticommutator_bulk_clears_sigma_floor(anticommutator_minimal) -> None:
    report = assess_M1_M2(
        anticommutator_minimal,
        0.05,
        (-3.0, 5.0),
        eta_grid=[1e-6, 1e-3, 1.0, 100.0],
        resolution=81,
        bulk_samples=6,
    )

    assert report.bulk_intervals
    assert report.failures == 0
    assert report.min_sigma >= 1e-3
    assert report.passed


def test_product_bulk_near_hard_edge_fails_sigma_floor() -> None:
    report = assess_M1_M2(product_pencil(2), 0.05, (-7.0, 1.5))

    assert report.failures == 0
    assert math.isfinite(report.sup_Linv_norm)
    assert report.min_sigma < 1e-3
    assert not report.passed
