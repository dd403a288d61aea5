"""
Stability - Toolkit Module
Bulk detection and numerical certification of the boundedness assumptions
on M and on the inverse stability operator.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import linalg as sla

from lib.dyson import (
    SolverOptions,
    density_profile_async,
    solve_del,
    stability_matrix,
)
from lib.errors import ToolkitError, UsageError
from lib.linearize import AnyLinearization, SymmetrizedLinearization

logger = logging.getLogger(__name__)

DEFAULT_ETA_GRID = tuple(float(eta) for eta in np.logspace(-6, 2, 9))
MAX_BULK_SAMPLES = 9
SIGMA_MIN_FLOOR = 1e-3

Interval = tuple[float, float]


def bulk_intervals(energies: Sequence[float], rho: Sequence[float], kappa: float) -> list[Interval]:
    """Maximal runs of grid points with kappa < rho < 1/kappa."""
    inside = [kappa < r < 1 / kappa for r in rho]
    intervals: list[Interval] = []
    start: Optional[int] = None
    for index, flag in enumerate(inside + [False]):
        if flag and start is None:
            start = index
        elif not flag and start is not None:
            intervals.append((float(energies[start]), float(energies[index - 1])))
            start = None
    return intervals


async def detect_bulk_async(
    lin: AnyLinearization,
    kappa: float,
    energy_range: tuple[float, float],
    resolution: int,
    eta: float = 1e-5,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
) -> list[Interval]:
    if kappa <= 0:
        raise UsageError("kappa must be positive.")
    if resolution < 2 or energy_range[1] <= energy_range[0]:
        raise UsageError("Energy range must be increasing with at least two grid points.")
    grid = np.linspace(energy_range[0], energy_range[1], resolution)
    profile = await density_profile_async(lin, grid, eta, options, concurrency=concurrency)
    intervals = bulk_intervals(grid, profile.rho, kappa)
    if not intervals:
        logger.info("No %.3g-bulk found in [%s, %s]", kappa, *energy_range)
    return intervals


def detect_bulk(
    lin: AnyLinearization,
    kappa: float,
    energy_range: tuple[float, float],
    resolution: int = 201,
    eta: float = 1e-5,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
) -> list[Interval]:
    """Grid intervals where the density lies strictly between kappa and 1/kappa."""
    return asyncio.run(detect_bulk_async(lin, kappa, energy_range, resolution, eta, options, concurrency))


@dataclass(frozen=True)
class StabilityRow:
    energy: float
    eta: float
    m_norm: Optional[float] = None
    sigma_min: Optional[float] = None
    trace_ratio: Optional[float] = None
    error: Optional[str] = None

    @property
    def linv_norm(self) -> Optional[float]:
        if self.sigma_min is None:
            return None
        return float("inf") if self.sigma_min == 0 else 1.0 / self.sigma_min

    def as_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "E": self.energy,
            "eta": self.eta,
            "MNorm": self.m_norm,
            "sigmaMin": self.sigma_min,
            "LinvNorm": self.linv_norm,
            "traceRatio": self.trace_ratio,
        }
        if self.error:
            payload["error"] = self.error
        return payload


@dataclass(frozen=True)
class StabilityReport:
    kappa: float
    bulk_intervals: list[Interval]
    rows: list[StabilityRow]
    threshold: Optional[float] = None
    sigma_floor: float = SIGMA_MIN_FLOOR
    sup_M_norm: float = field(init=False)
    sup_Linv_norm: float = field(init=False)
    growth_constant: float = field(init=False)
    min_sigma: float = field(init=False)

    def __post_init__(self) -> None:
        solved = [row for row in self.rows if row.error is None]
        object.__setattr__(self, "min_sigma", min((row.sigma_min for row in solved), default=float("inf")))
        object.__setattr__(self, "sup_M_norm", max((row.m_norm for row in solved), default=0.0))
        object.__setattr__(self, "sup_Linv_norm", max((row.linv_norm for row in solved), default=0.0))
        object.__setattr__(
            self,
            "growth_constant",
            max((row.m_norm / (1 + 1 / row.eta) for row in solved if row.eta > 0), default=0.0),
        )

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if row.error is not None)

    @property
    def passed(self) -> bool:
        if not self.rows or self.failures:
            return False
        if not (np.isfinite(self.sup_M_norm) and np.isfinite(self.sup_Linv_norm)):
            return False
        if self.min_sigma < self.sigma_floor:
            return False
        if self.threshold is None:
            return True
        return self.sup_M_norm <= self.threshold and self.sup_Linv_norm <= self.threshold

    def as_dict(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa,
            "bulkIntervals": [list(interval) for interval in self.bulk_intervals],
            "supMNorm": self.sup_M_norm,
            "supLinvNorm": self.sup_Linv_norm,
            "growthConstant": self.growth_constant,
            "threshold": self.threshold,
            "minSigma": self.min_sigma if np.isfinite(self.min_sigma) else None,
            "sigmaFloor": self.sigma_floor,
            "pass": self.passed,
            "failures": self.failures,
            "rows": [row.as_dict() for row in self.rows],
        }


def stability_row(
    sym: SymmetrizedLinearization,
    energy: float,
    eta: float,
    options: Optional[SolverOptions] = None,
) -> StabilityRow:
    try:
        solution = solve_del(sym, complex(energy, eta), options)
    except ToolkitError as exc:
        logger.warning("Stability sample E=%s eta=%s failed: %s", energy, eta, exc)
        return StabilityRow(energy, eta, error=f"{type(exc).__name__}: {exc}")
    M = solution.M
    imaginary = (M - M.conj().T) / 2j
    trace_ratio = float(np.trace(imaginary).real / imaginary[0, 0].real) if imaginary[0, 0].real > 0 else None
    return StabilityRow(
        energy=energy,
        eta=eta,
        m_norm=float(np.linalg.norm(M, 2)),
        sigma_min=float(sla.svdvals(stability_matrix(sym, M)).min()),
        trace_ratio=trace_ratio,
    )


def _bulk_sample_energies(grid: np.ndarray, intervals: Sequence[Interval], limit: int) -> list[float]:
    energies = [float(e) for e in grid if any(lo <= e <= hi for lo, hi in intervals)]
    if len(energies) <= limit:
        return energies
    picks = np.linspace(0, len(energies) - 1, limit).round().astype(int)
    return [energies[i] for i in sorted(set(picks))]


async def assess_M1_M2_async(
    lin: AnyLinearization,
    kappa: float,
    energy_range: tuple[float, float],
    eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
    resolution: int = 201,
    threshold: Optional[float] = None,
    dos_eta: float = 1e-5,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
    bulk_samples: int = MAX_BULK_SAMPLES,
    sigma_floor: float = SIGMA_MIN_FLOOR,
) -> StabilityReport:
    sym = lin.symmetrized()
    etas = sorted(float(eta) for eta in eta_grid)
    if not etas or etas[0] <= 0:
        raise UsageError("eta grid must contain positive values.")
    if etas[0] > 1e-6 or etas[-1] < 1e2:
        logger.warning("eta grid [%.1e, %.1e] does not span [1e-6, 1e2]; sups cover the sampled range only", etas[0], etas[-1])

    intervals = await detect_bulk_async(lin, kappa, energy_range, resolution, dos_eta, options, concurrency)
    grid = np.linspace(energy_range[0], energy_range[1], resolution)
    energies = _bulk_sample_energies(grid, intervals, bulk_samples)

    semaphore = asyncio.Semaphore(max(1, concurrency))
    loop = asyncio.get_running_loop()

    async def sample(energy: float, eta: float) -> StabilityRow:
        async with semaphore:
            return await loop.run_in_executor(None, stability_row, sym, energy, eta, options)

    rows = await asyncio.gather(*(sample(energy, eta) for energy in energies for eta in etas))
    report = StabilityReport(kappa, intervals, list(rows), threshold, sigma_floor)
    logger.info(
        "Stability: %d samples, sup ||M|| = %.4g, sup ||L^-1|| = %.4g, min sigma = %.3g, pass=%s",
        len(rows),
        report.sup_M_norm,
        report.sup_Linv_norm,
        report.min_sigma,
        report.passed,
    )
    return report


def assess_M1_M2(
    lin: AnyLinearization,
    kappa: float,
    energy_range: tuple[float, float],
    eta_grid: Sequence[float] = DEFAULT_ETA_GRID,
    resolution: int = 201,
    threshold: Optional[float] = None,
    dos_eta: float = 1e-5,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
    bulk_samples: int = MAX_BULK_SAMPLES,
    sigma_floor: float = SIGMA_MIN_FLOOR,
) -> StabilityReport:
    """Sample ||M|| and ||L^-1|| over the detected bulk times an eta grid."""
    return asyncio.run(
        assess_M1_M2_async(
            lin,
            kappa,
            energy_range,
            eta_grid,
            resolution,
            threshold,
            dos_eta,
            options,
            concurrency,
            bulk_samples,
            sigma_floor,
        )
    )
