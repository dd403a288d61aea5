from __future__ import annotations

from pathlib import Path

import pytest

from lib.config import AppConfig
from lib.linearize import SymmetrizedLinearization, minimal_linearization, standard_linearization
from lib.ncpoly import NCPolynomial, parse_poly, shift_to_q


@pytest.fixture
def semicircle_q() -> NCPolynomial:
    """q = x1, so 1 - q is a semicircular element centred at 1."""
    return parse_poly("x1", 1, 0)


@pytest.fixture
def semicircle_pencil(semicircle_q: NCPolynomial) -> SymmetrizedLinearization:
    return standard_linearization(semicircle_q)


@pytest.fixture
def anticommutator_q() -> NCPolynomial:
    _, q = shift_to_q(parse_poly("x1*x2 + x2*x1", 2, 0))
    return q


@pytest.fixture
def anticommutator_pencil(anticommutator_q: NCPolynomial) -> SymmetrizedLinearization:
    return standard_linearization(anticommutator_q)


@pytest.fixture
def anticommutator_minimal(anticommutator_pencil: SymmetrizedLinearization) -> SymmetrizedLinearization:
    return minimal_linearization(anticommutator_pencil)


@pytest.fixture
def app_config(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> AppConfig:
    for name in ("NCLIN_TOL", "NCLIN_MAX_ITERATIONS", "NCLIN_DAMPING", "NCLIN_THREADS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("NCLIN_RESULTS_DIR", str(tmp_path / "results"))
    return AppConfig.load()
