from __future__ import annotations

import os
from pathlib import Path

import pytest
from pydantic import ValidationError

from lib.config import AppConfig


def test_iteration_budget_must_be_positive(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_MAX_ITERATIONS", "0")

    with pytest.raises(ValidationError, match="greater than or equal to 1"):
        AppConfig()


def test_iteration_budget_must_be_integer(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_MAX_ITERATIONS", "many")

    with pytest.raises(ValueError, match="NCLIN_MAX_ITERATIONS must be an integer"):
        AppConfig()


def test_tolerance_must_be_a_number(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_TOL", "tight")

    with pytest.raises(ValueError, match="NCLIN_TOL must be a number"):
        AppConfig()


def test_damping_is_bounded() -> None:
    with pytest.raises(ValidationError):
        AppConfig(NCLIN_DAMPING=1.5)


def test_environment_overrides_reach_solver_options(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_TOL", " 1e-9 ")
    monkeypatch.setenv("NCLIN_MAX_ITERATIONS", "250")

    options = AppConfig.load().solver_options()

    assert options.tol == 1e-9
    assert options.max_iterations == 250


def test_thread_count_prefers_override(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_THREADS", "3")
    config = AppConfig.load()

    assert config.thread_count() == 3
    assert config.thread_count(5) == 5
    assert AppConfig(NCLIN_THREADS=0).thread_count() == (os.cpu_count() or 1)


def test_results_path_defaults_to_repository_results(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv("NCLIN_RESULTS_DIR", raising=False)
    assert AppConfig.load().results_path.name == "results"

    monkeypatch.setenv("NCLIN_RESULTS_DIR", str(tmp_path))
    assert AppConfig.load().results_path == tmp_path


def test_sigma_floor_comes_from_environment(monkeypatch) -> None:
    monkeypatch.setenv("NCLIN_SIGMA_FLOOR", "5e-4")

    assert AppConfig.load().NCLIN_SIGMA_FLOOR == 5e-4
    assert AppConfig(NCLIN_SIGMA_FLOOR=1e-3).NCLIN_SIGMA_FLOOR == 1e-3
