"""
Configuration - Toolkit Module
Typed solver and experiment defaults, overridable from the environment.
"""

import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from lib.dyson import SolverOptions


def _env_int(name: str, default: int) -> int:
    """Parse integer env values with explicit validation errors."""
    raw = os.getenv(name)
    if raw is None:
        return default

    try:
        return int(raw.strip())
    except ValueError as exc:
        raise ValueError(f"{name} must be an integer.") from exc


def _env_float(name: str, default: float) -> float:
    """Parse float env values with explicit validation errors."""
    raw = os.getenv(name)
    if raw is None:
        return default

    try:
        return float(raw.strip())
    except ValueError as exc:
        raise ValueError(f"{name} must be a number.") from exc


def _env_str(name: str) -> str:
    """Read string env values as concrete strings."""
    raw = os.getenv(name)
    return raw.strip() if raw is not None else ""


class AppConfig(BaseModel):
    model_config = ConfigDict(validate_default=True)

    # App Identity
    APP_NAME: str = "NC Linearization Toolkit"
    VERSION: str = "1.0.0"

    # Dyson solver
    NCLIN_TOL: float = Field(default_factory=lambda: _env_float("NCLIN_TOL", 1e-11), gt=0)
    NCLIN_MAX_ITERATIONS: int = Field(
        default_factory=lambda: _env_int("NCLIN_MAX_ITERATIONS", 10_000),
        ge=1,
    )
    NCLIN_DAMPING: float = Field(default_factory=lambda: _env_float("NCLIN_DAMPING", 0.5), gt=0, le=1)
    NCLIN_EPS_FLOOR: float = Field(default_factory=lambda: _env_float("NCLIN_EPS_FLOOR", 1e-10), gt=0)

    # Density, bulk and experiment defaults
    NCLIN_DOS_ETA: float = Field(default_factory=lambda: _env_float("NCLIN_DOS_ETA", 1e-5), gt=0)
    NCLIN_KAPPA: float = Field(default_factory=lambda: _env_float("NCLIN_KAPPA", 0.05), gt=0)
    NCLIN_GAMMA: float = Field(default_factory=lambda: _env_float("NCLIN_GAMMA", 0.1), gt=0, lt=1)
    NCLIN_SIGMA_FLOOR: float = Field(default_factory=lambda: _env_float("NCLIN_SIGMA_FLOOR", 1e-3), ge=0)

    # Linear algebra
    NCLIN_RANK_TOL: float = Field(default_factory=lambda: _env_float("NCLIN_RANK_TOL", 1e-10), gt=0)

    # Parallelism (0 means all cores)
    NCLIN_THREADS: int = Field(default_factory=lambda: _env_int("NCLIN_THREADS", 0), ge=0)

    # Output location (empty means ./results)
    NCLIN_RESULTS_DIR: str = Field(default_factory=lambda: _env_str("NCLIN_RESULTS_DIR"))

    @property
    def results_path(self) -> Path:
        if self.NCLIN_RESULTS_DIR:
            return Path(self.NCLIN_RESULTS_DIR)
        return Path(__file__).parent.parent / "results"

    def thread_count(self, override: Optional[int] = None) -> int:
        requested = override if override is not None else self.NCLIN_THREADS
        if requested and requested > 0:
            return requested
        return os.cpu_count() or 1

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            tol=self.NCLIN_TOL,
            max_iterations=self.NCLIN_MAX_ITERATIONS,
            damping=self.NCLIN_DAMPING,
            eps_floor=self.NCLIN_EPS_FLOOR,
        )

    def as_dict(self) -> dict[str, object]:
        return self.model_dump()

    @classmethod
    def load(cls) -> "AppConfig":
        """Load configuration from environment."""
        return cls()
