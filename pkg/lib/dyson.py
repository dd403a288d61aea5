"""
Dyson - Toolkit Module
Solver for the matrix Dyson equation of a linearization pencil.

    I + M (zJ - K0) + M S[M] = 0,    S[R] = sum_g K_g R K_g,    Im M >= 0.

The solver follows an epsilon homotopy on a damped fixed-point map and
polishes with Newton steps. Curves over a grid of spectral parameters are
solved in warm-started blocks that run concurrently.
"""

from __future__ import annotations

import asyncio
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy import linalg as sla

from lib.errors import (
    ConvergenceError,
    DensityMassError,
    PositivityError,
    SingularStabilityError,
    ToolkitError,
    UsageError,
)
from lib.linearize import AnyLinearization, SymmetrizedLinearization

logger = logging.getLogger(__name__)

STAGE_TOL = 1e-9
STAGE_ITERATIONS = 200
NEWTON_ITERATIONS = 60
BACKTRACK_STEPS = 30
MIN_DAMPING = 1.0 / 1024
SINGULARITY_TOL = 1e-12
CDF_CONTOUR_HEIGHT = 1.0
CDF_VERTICAL_NODES = 32
CDF_HORIZONTAL_NODES = 16
MASS_TOL = 5e-3


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-11
    max_iterations: int = 10_000
    damping: float = 0.5
    eps_floor: float = 1e-10
    positivity_tol: float = 1e-10
    newton: bool = True


@dataclass(frozen=True, eq=False)
class DelSolution:
    z: complex
    M: np.ndarray
    residual: float
    iterations: int
    stages: int
    newton_steps: int = 0
    warm_started: bool = False
    final_eps: float = 0.0

    @property
    def m11(self) -> complex:
        return complex(self.M[0, 0])

    @property
    def density(self) -> float:
        return float(self.M[0, 0].imag / np.pi)

    def as_dict(self, include_matrix: bool = False) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "z": [self.z.real, self.z.imag],
            "m11": [self.m11.real, self.m11.imag],
            "residual": self.residual,
            "iterations": self.iterations,
            "stages": self.stages,
            "newtonSteps": self.newton_steps,
            "warmStarted": self.warm_started,
            "finalEps": self.final_eps,
        }
        if include_matrix:
            payload["M"] = [[[v.real, v.imag] for v in row] for row in self.M]
        return payload


def apply_superop(lin: AnyLinearization, R: np.ndarray) -> np.ndarray:
    """S[R] = sum_g K_g R K_g over the hermitian family."""
    family = lin.symmetrized().stacked_family
    R = np.asarray(R, dtype=complex)
    if R.shape != (family.shape[1], family.shape[2]) and family.shape[0]:
        raise UsageError(f"Matrix of shape {R.shape} does not fit a pencil of dimension {family.shape[1]}.")
    if family.shape[0] == 0:
        return np.zeros_like(R)
    return np.einsum("gij,jk,gkl->il", family, R, family)


def del_residual(lin: AnyLinearization, M: np.ndarray, z: complex) -> float:
    sym = lin.symmetrized()
    G = np.eye(sym.m) + M @ (z * sym.J - sym.K0) + M @ apply_superop(sym, M)
    return float(np.linalg.norm(G))


def stability_matrix(lin: AnyLinearization, M: np.ndarray) -> np.ndarray:
    """Row-major matrix of X -> X - sum_g M K_g X K_g M."""
    sym = lin.symmetrized()
    m = sym.m
    operator = np.eye(m * m, dtype=complex)
    for K in sym.K:
        operator -= np.kron(M @ K, (K @ M).T)
    return operator


def dM_dz(lin: AnyLinearization, M: np.ndarray, z: Optional[complex] = None) -> np.ndarray:
    """Solve X - M S[X] M = M J M for the spectral derivative of M at z."""
    sym = lin.symmetrized()
    operator = stability_matrix(sym, M)
    singular_values = sla.svdvals(operator)
    if singular_values.min() <= SINGULARITY_TOL * max(1.0, singular_values.max()):
        raise SingularStabilityError(
            "Stability operator is singular at this point.",
            {"sigmaMin": float(singular_values.min())},
        )
    rhs = (M @ sym.J @ M).reshape(-1)
    return np.linalg.solve(operator, rhs).reshape(sym.m, sym.m)


def _imaginary_part(M: np.ndarray) -> np.ndarray:
    return (M - M.conj().T) / 2j


def _is_positive(M: np.ndarray, tol: float) -> bool:
    scale = max(1.0, float(np.abs(M).max()))
    return bool(np.linalg.eigvalsh(_imaginary_part(M)).min() >= -tol * scale)


class _DysonSystem:
    """Fixed-point and Newton machinery for one pencil at one spectral point."""

    def __init__(self, sym: SymmetrizedLinearization, z: complex, options: SolverOptions) -> None:
        self.sym = sym
        self.z = z
        self.options = options
        self.identity = np.eye(sym.m, dtype=complex)
        self.base = z * sym.J - sym.K0
        self.iterations = 0
        self.newton_steps = 0

    def shifted(self, M: np.ndarray, eps: float) -> np.ndarray:
        return self.base + 1j * eps * self.identity + apply_superop(self.sym, M)

    def residual(self, M: np.ndarray, eps: float) -> float:
        return float(np.linalg.norm(self.identity + M @ self.shifted(M, eps)))

    def fixed_point(self, M: np.ndarray, eps: float, tol: float, budget: int) -> tuple[np.ndarray, float]:
        damping = self.options.damping
        current = self.residual(M, eps)
        steps = 0
        while current > tol and steps < budget and self.iterations < self.options.max_iterations:
            steps += 1
            self.iterations += 1
            try:
                image = -np.linalg.inv(self.shifted(M, eps))
            except np.linalg.LinAlgError:
                break
            candidate = (1 - damping) * M + damping * image
            candidate_residual = self.residual(candidate, eps)
            if candidate_residual > current and damping > MIN_DAMPING:
                damping /= 2
                continue
            M, current = candidate, candidate_residual
        return M, current

    def newton(self, M: np.ndarray, eps: float, tol: float) -> tuple[np.ndarray, float]:
        m = self.sym.m
        current = self.residual(M, eps)
        for _ in range(NEWTON_ITERATIONS):
            if current <= tol:
                break
            B = self.shifted(M, eps)
            G = self.identity + M @ B
            jacobian = np.kron(self.identity, B.T)
            for K in self.sym.K:
                jacobian += np.kron(M @ K, K.T)
            try:
                step = np.linalg.solve(jacobian, -G.reshape(-1)).reshape(m, m)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            accepted = False
            for _ in range(BACKTRACK_STEPS):
                candidate = M + t * step
                candidate_residual = self.residual(candidate, eps)
                if candidate_residual < current and _is_positive(candidate, self.options.positivity_tol):
                    M, current = candidate, candidate_residual
                    accepted = True
                    break
                t /= 2
            self.newton_steps += 1
            if not accepted:
                break
        return M, current

    def stage(self, M: np.ndarray, eps: float, tol: float) -> tuple[np.ndarray, float]:
        M, current = self.fixed_point(M, eps, tol, STAGE_ITERATIONS)
        if current > tol and self.options.newton:
            M, current = self.newton(M, eps, tol)
        return M, current


def _eps_schedule(sym: SymmetrizedLinearization, options: SolverOptions) -> list[float]:
    eps = max(1.0, float(np.linalg.norm(sym.K0, 2)))
    schedule = [eps]
    while eps / 2 >= options.eps_floor:
        eps /= 2
        schedule.append(eps)
    schedule.append(0.0)
    return schedule


def solve_del(
    lin: AnyLinearization,
    z: complex,
    options: Optional[SolverOptions] = None,
    M0: Optional[np.ndarray] = None,
) -> DelSolution:
    """Solve the Dyson equation at z in the closed upper half-plane."""
    options = options or SolverOptions()
    sym = lin.symmetrized()
    z = complex(z)
    if z.imag < 0:
        raise UsageError("Spectral parameter must satisfy Im z >= 0.")

    if M0 is not None:
        system = _DysonSystem(sym, z, options)
        M, residual = system.stage(np.array(M0, dtype=complex), 0.0, options.tol)
        if residual <= options.tol and _is_positive(M, options.positivity_tol):
            return DelSolution(z, M, residual, system.iterations, 1, system.newton_steps, True)
        logger.debug("Warm start failed at z=%s (residual %.2e); running homotopy", z, residual)

    system = _DysonSystem(sym, z, options)
    M = 1j * np.eye(sym.m, dtype=complex)
    schedule = _eps_schedule(sym, options)
    residual = np.inf
    for eps in schedule:
        stage_tol = options.tol if eps == 0.0 else max(STAGE_TOL, options.tol)
        M, residual = system.stage(M, eps, stage_tol)
        if system.iterations >= options.max_iterations and residual > stage_tol:
            break

    if residual > options.tol:
        raise ConvergenceError(
            f"Dyson solver did not converge at z={z}.",
            {"z": [z.real, z.imag], "residual": residual, "iterations": system.iterations},
        )
    if not _is_positive(M, options.positivity_tol):
        raise PositivityError(
            f"Solution at z={z} has Im M outside the positive cone.",
            {"z": [z.real, z.imag], "minImEig": float(np.linalg.eigvalsh(_imaginary_part(M)).min())},
        )
    logger.debug("Solved z=%s in %d iterations (residual %.2e)", z, system.iterations, residual)
    return DelSolution(z, M, residual, system.iterations, len(schedule), system.newton_steps)


def _solve_block(
    sym: SymmetrizedLinearization,
    points: Sequence[complex],
    options: SolverOptions,
) -> list[DelSolution]:
    solutions: list[DelSolution] = []
    previous: Optional[np.ndarray] = None
    for z in points:
        try:
            solution = solve_del(sym, z, options, M0=previous)
        except ToolkitError as exc:
            exc.detail.setdefault("E", z.real)
            logger.error("Dyson solve failed at E=%s: %s", z.real, exc)
            raise
        solutions.append(solution)
        previous = solution.M
    return solutions


def _contiguous_blocks(count: int, blocks: int) -> list[range]:
    blocks = max(1, min(blocks, count))
    bounds = np.linspace(0, count, blocks + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(blocks) if bounds[i + 1] > bounds[i]]


async def solve_points_async(
    lin: AnyLinearization,
    z_grid: Sequence[complex],
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
) -> list[DelSolution]:
    """Solve at each z; warm starts chain inside contiguous blocks, results keep input order."""
    options = options or SolverOptions()
    sym = lin.symmetrized()
    points = [complex(z) for z in z_grid]
    if not points:
        return []
    semaphore = asyncio.Semaphore(max(1, concurrency))
    loop = asyncio.get_running_loop()

    async def run_block(indices: range) -> list[DelSolution]:
        async with semaphore:
            return await loop.run_in_executor(
                None, partial(_solve_block, sym, [points[i] for i in indices], options)
            )

    blocks = _contiguous_blocks(len(points), concurrency)
    results = await asyncio.gather(*(run_block(indices) for indices in blocks), return_exceptions=True)

    merged: list[Optional[DelSolution]] = [None] * len(points)
    for indices, result in zip(blocks, results):
        if isinstance(result, BaseException):
            raise result
        for index, solution in zip(indices, result):
            merged[index] = solution
    return [solution for solution in merged if solution is not None]


async def solve_curve_async(
    lin: AnyLinearization,
    energies: Sequence[float],
    eta: float,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
) -> list[DelSolution]:
    if eta < 0:
        raise UsageError("eta must be non-negative.")
    grid = np.asarray(energies, dtype=float)
    return await solve_points_async(lin, grid + 1j * eta, options, concurrency)


def solve_curve(
    lin: AnyLinearization,
    energies: Sequence[float],
    eta: float,
    options: Optional[SolverOptions] = None,
    concurrency: int = 4,
) -> list[DelSolution]:
    return asyncio.run(solve_curve_async(lin, energies, eta, options, concurrency))


def density_of_states(
    lin: AnyLinearization,
    energy: float,
    eta: float,
    options: Optional[SolverOptions] = None,
    richardson: bool = False,
) -> float:
    """Im M11(E + i eta) / pi, optionally extrapolated as 2 rho(eta/2) - rho(eta)."""
    if eta <= 0:
        raise UsageError("Evaluation eta must be positive.")
    rho = solve_del(lin, complex(energy, eta), options).density
    if not richardson:
        return max(rho, 0.0)
    rho_half = solve_del(lin, complex(energy, eta / 2), options).density
    return max(2 * rho_half - rho, 0.0)


@dataclass(frozen=True, eq=False)
class DensityProfile:
    energies: np.ndarray
    rho: np.ndarray
    eta: float
    residuals: np.ndarray
    richardson: bool = False
    mass: float = field(init=False)

    def __post_init__(self) -> None:
        mass = float(integrate.trapezoid(self.rho, self.energies)) if len(self.energies) > 1 else 0.0
        object.__setattr__(self, "mass", mass)

    def cumulative(self) -> np.ndarray:
        return integrate.cumulative_trapezoid(self.rho, self.energies, initial=0.0)

    def rows(self, energy_shift: float = 0.0) -> list[tuple[float, float, float, float]]:
        return [
            (float(e) + energy_shift, float(r), self.eta, float(res))
            for e, r, res in zip(self.energies, self.rho, self.residuals)
        ]

    def as_dict(self) -> dict[str, Any]:
        return {
            "eta": self.eta,
            "richardson": self.richardson,
            "mass": self.mass,
            "energies": [float(e) for e in self.energies],
            "rho": [float(r) for r in self.rho],
            "residuals": [float(r) for r in self.residuals],
        }


async def density_profile_async(
    lin: AnyLinearization,
    energies: Sequence[float],
    eta: float,
    options: Optional[SolverOptions] = None,
    richardson: bool = False,
    concurrency: int = 4,
) -> DensityProfile:
    grid = np.asarray(energies, dtype=float)
    if eta <= 0:
        raise UsageError("Evaluation eta must be positive.")
    if np.any(np.diff(grid) <= 0):
        raise UsageError("Energy grid must be strictly increasing.")
    solutions = await solve_curve_async(lin, grid, eta, options, concurrency)
    rho = np.array([s.density for s in solutions])
    residuals = np.array([s.residual for s in solutions])
    if richardson:
        halved = await solve_curve_async(lin, grid, eta / 2, options, concurrency)
        rho = 2 * np.array([s.density for s in halved]) - rho
        residuals = np.maximum(residuals, [s.residual for s in halved])
    return DensityProfile(grid, np.clip(rho, 0.0, None), eta, residuals, richardson)


def density_profile(
    lin: AnyLinearization,
    energies: Sequence[float],
    eta: float,
    options: Optional[SolverOptions] = None,
    richardson: bool = False,
    concurrency: int = 4,
) -> DensityProfile:
    return asyncio.run(density_profile_async(lin, energies, eta, options, richardson, concurrency))


def with_overrides(options: SolverOptions, **overrides: Any) -> SolverOptions:
    return replace(options, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True, eq=False)
class CumulativeDistribution:
    """F(E) = mu((-inf, E]) at sorted energies."""

    energies: np.ndarray
    values: np.ndarray
    mass: float

    def __call__(self, energies: Sequence[float]) -> np.ndarray:
        return np.interp(energies, self.energies, self.values, left=0.0, right=1.0)

    def as_dict(self) -> dict[str, Any]:
        return {
            "mass": self.mass,
            "energies": [float(e) for e in self.energies],
            "values": [float(v) for v in self.values],
        }


def _unit_gauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    points, weights = leggauss(nodes)
    return (points + 1) / 2, weights / 2


async def cumulative_distribution_async(
    lin: AnyLinearization,
    energies: Sequence[float],
    lower: float,
    upper: float,
    options: Optional[SolverOptions] = None,
    height: float = CDF_CONTOUR_HEIGHT,
    concurrency: int = 4,
) -> CumulativeDistribution:
    """
    Integrated density from M11 along a contour in the upper half-plane.

    With A(e) = int_0^H M11(e + iy) dy and B(E) = int_lower^E M11(x + iH) dx,
    F(E) = (Re A(lower) + Im B(E) - Re A(E)) / pi whenever `lower` lies left
    of the spectrum. Vertical legs use y = H s^2 so that inverse square-root
    edges stay smooth under Gauss-Legendre quadrature. F(upper) must come out
    as 1 within MASS_TOL.
    """
    if not lower < upper:
        raise UsageError("Contour needs lower < upper.")
    if height <= 0:
        raise UsageError("Contour height must be positive.")
    targets = np.unique(np.clip(np.asarray(energies, dtype=float), lower, upper))
    columns = np.concatenate([[lower], targets, [upper]])

    s, w = _unit_gauss(CDF_VERTICAL_NODES)
    order = np.argsort(-s)
    s, w = s[order], w[order]
    heights = height * s**2
    vertical_weights = 2 * height * s * w

    x_unit, x_weights = _unit_gauss(CDF_HORIZONTAL_NODES)
    segments: list[tuple[np.ndarray, np.ndarray]] = []
    for a, b in zip(columns[:-1], columns[1:]):
        cuts = np.linspace(a, b, max(1, math.ceil((b - a) / height)) + 1)
        widths = np.diff(cuts)
        xs = np.concatenate([left + width * x_unit for left, width in zip(cuts[:-1], widths)])
        ws = np.concatenate([width * x_weights for width in widths])
        segments.append((xs, ws))

    points = [complex(e, y) for e in columns for y in heights]
    points += [complex(x, height) for xs, _ in segments for x in xs]
    solutions = await solve_points_async(lin, points, options, concurrency)
    m11 = np.array([solution.m11 for solution in solutions])

    split = len(columns) * len(heights)
    vertical = m11[:split].reshape(len(columns), len(heights)) @ vertical_weights
    horizontal = []
    offset = split
    for xs, ws in segments:
        horizontal.append(m11[offset : offset + len(xs)] @ ws)
        offset += len(xs)
    along = np.concatenate([[0.0], np.cumsum(horizontal)])

    values = (vertical[0].real + along.imag - vertical.real) / np.pi
    mass = float(values[-1])
    if abs(mass - 1.0) > MASS_TOL:
        raise DensityMassError(
            f"Integrated density has mass {mass:.6f} on [{lower:.4g}, {upper:.4g}].",
            {"mass": mass, "lower": lower, "upper": upper},
        )
    logger.debug("Cumulative distribution at %d energies, mass %.8f", len(targets), mass)
    return CumulativeDistribution(targets, np.clip(values[1:-1], 0.0, 1.0), mass)


def cumulative_distribution(
    lin: AnyLinearization,
    energies: Sequence[float],
    lower: float,
    upper: float,
    options: Optional[SolverOptions] = None,
    height: float = CDF_CONTOUR_HEIGHT,
    concurrency: int = 4,
) -> CumulativeDistribution:
    return asyncio.run(cumulative_distribution_async(lin, energies, lower, upper, options, height, concurrency))
