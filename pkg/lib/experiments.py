"""
Experiments - Toolkit Module
Monte Carlo experiments comparing sampled polynomials with the Dyson
equation: Schur identity, local law, rigidity, delocalization, speed of
convergence and global density.
"""

from __future__ import annotations

import asyncio
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Awaitable, Callable, Literal, Optional, Sequence, get_args

import numpy as np
from scipy import stats

from lib.dyson import (
    CumulativeDistribution,
    DensityProfile,
    SolverOptions,
    cumulative_distribution_async,
    density_profile_async,
    solve_del,
)
from lib.errors import NUMERICAL_FAILURE_TYPES, ExperimentError, ExperimentExecutionFailedError
from lib.ensembles import (
    EnsembleConfig,
    EntryLaw,
    build_linearized_matrix,
    evaluate_model,
    generalized_resolvent_block,
    replica_rng,
    sample_ensemble,
    spectral_bound,
    spectral_stats,
    ward_identity_residual,
)
from lib.freeprob import limiting_moments
from lib.linearize import AnyLinearization, as_linearization
from lib.ncpoly import NCPolynomial, hermitize
from lib.stability import bulk_intervals

logger = logging.getLogger(__name__)

ExperimentKind = Literal["schur", "locallaw", "rigidity", "deloc", "speed", "globaldos"]
EXPERIMENT_KINDS: tuple[str, ...] = get_args(ExperimentKind)
MIN_FIT_POINTS = 3
SCHUR_ETA = 0.5
SCHUR_POINTS = 5
BULK_EDGE_TRIM = 0.1
SUPPORT_MARGIN = 0.5
# N F(E) within this of an integer counts as that integer.
INDEX_ROUNDING_TOL = 1e-9


@dataclass(frozen=True)
class ExperimentParams:
    sizes: tuple[int, ...] = (200,)
    replicas: int = 3
    seed: int = 0
    law: EntryLaw = "complex-gaussian"
    gamma: float = 0.1
    kappa: float = 0.05
    etas: Optional[tuple[float, ...]] = None
    n_etas: int = 6
    energies: Optional[tuple[float, ...]] = None
    energy_points: int = 10
    energy_range: Optional[tuple[float, float]] = None
    dos_eta: float = 1e-5
    dos_resolution: int = 401
    bins: int = 40
    overlap_vectors: int = 10
    concurrency: int = 4
    energy_shift: float = 0.0

    def as_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        return {key: list(value) if isinstance(value, tuple) else value for key, value in payload.items()}


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    stderr: float
    points: int

    def as_dict(self) -> dict[str, Any]:
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr, "points": self.points}


def fit_loglog(x: Sequence[float], y: Sequence[float], label: str) -> ScalingFit:
    """Least-squares slope of log y against log x."""
    pairs = [(a, b) for a, b in zip(x, y) if a > 0 and b > 0]
    if len(pairs) < MIN_FIT_POINTS or len({a for a, _ in pairs}) < 2:
        raise ExperimentError(
            f"Fit for {label} needs at least {MIN_FIT_POINTS} positive points at distinct abscissae.",
            {"fit": label, "points": len(pairs)},
        )
    result = stats.linregress(np.log([a for a, _ in pairs]), np.log([b for _, b in pairs]))
    return ScalingFit(float(result.slope), float(result.intercept), float(result.stderr), len(pairs))


@dataclass(frozen=True)
class ReplicaFailure:
    """Serializable failure information for one replica run."""

    size: int
    replica: int
    error_type: str
    message: str

    def as_dict(self) -> dict[str, Any]:
        return {"N": self.size, "replica": self.replica, "errorType": self.error_type, "message": self.message}


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    parameters: dict[str, Any]
    results: dict[str, Any]
    timing: dict[str, float] = field(default_factory=dict)
    raw_rows: list[tuple[Any, ...]] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "parameters": self.parameters,
            "results": self.results,
            "timing": self.timing,
        }


@dataclass(frozen=True, eq=False)
class ModelContext:
    """Deterministic quantities shared by all replicas of one experiment."""

    profile: DensityProfile
    bulk: list[tuple[float, float]]

    def bulk_maximum(self) -> float:
        """Energy of the largest density inside the bulk, away from interval ends."""
        inside = [
            (rho, energy)
            for energy, rho in zip(self.profile.energies, self.profile.rho)
            if any(
                lo + BULK_EDGE_TRIM * (hi - lo) <= energy <= hi - BULK_EDGE_TRIM * (hi - lo)
                for lo, hi in self.bulk
            )
        ]
        if not inside:
            raise ExperimentError("No bulk interval found for this model.")
        return float(max(inside)[1])

    def bulk_grid(self, points: int) -> list[float]:
        if not self.bulk:
            raise ExperimentError("No bulk interval found for this model.")
        lo, hi = max(self.bulk, key=lambda interval: interval[1] - interval[0])
        return [float(e) for e in np.linspace(lo, hi, points + 2)[1:-1]]


def eigenvalue_index(distribution: CumulativeDistribution, energy: float, N: int) -> int:
    """iota(E) = ceil(N F(E)), clipped to 1..N."""
    scaled = N * float(distribution([energy])[0])
    return int(min(max(math.ceil(scaled - INDEX_ROUNDING_TOL), 1), N))


ReplicaJob = Callable[[int, int, int], Any]


class ExperimentRunner:
    """Runs one experiment kind for a linearized model."""

    def __init__(
        self,
        lin: AnyLinearization,
        q: NCPolynomial,
        params: ExperimentParams,
        options: Optional[SolverOptions] = None,
    ) -> None:
        self.lin = as_linearization(lin)
        self.q = q
        self.params = params
        self.options = options or SolverOptions()
        self.concurrency_limit = max(1, params.concurrency)
        if params.replicas < 1 or not params.sizes:
            raise ExperimentError("Experiments need at least one size and one replica.")
        for N in params.sizes:
            EnsembleConfig(N, params.law, params.seed, params.replicas)

    def ensemble(self, N: int) -> EnsembleConfig:
        return EnsembleConfig(N, self.params.law, self.params.seed, self.params.replicas)

    def sample_matrix(self, size_index: int, replica: int) -> np.ndarray:
        N = self.params.sizes[size_index]
        X, Y = sample_ensemble(self.ensemble(N), self.q.alpha_star, self.q.beta_star, replica, size_index)
        return evaluate_model(self.q, X, Y)

    def support(self) -> tuple[float, float]:
        bound = spectral_bound(self.q) + SUPPORT_MARGIN
        return 1.0 - bound, 1.0 + bound

    def energy_window(self) -> tuple[float, float]:
        return self.params.energy_range if self.params.energy_range is not None else self.support()

    async def model_context(self) -> ModelContext:
        grid = np.linspace(*self.energy_window(), self.params.dos_resolution)
        profile = await density_profile_async(
            self.lin, grid, self.params.dos_eta, self.options, concurrency=self.concurrency_limit
        )
        return ModelContext(profile, bulk_intervals(grid, profile.rho, self.params.kappa))

    async def experiment_energies(self) -> list[float]:
        if self.params.energies:
            return list(self.params.energies)
        return (await self.model_context()).bulk_grid(self.params.energy_points)

    async def distribution(self, energies: Sequence[float]) -> CumulativeDistribution:
        lower, upper = self.support()
        return await cumulative_distribution_async(
            self.lin, energies, lower, upper, self.options, concurrency=self.concurrency_limit
        )

    async def run_replicas(self, job: ReplicaJob) -> dict[tuple[int, int], Any]:
        """Run job(size_index, N, replica) for every size and replica concurrently."""
        semaphore = asyncio.Semaphore(self.concurrency_limit)
        loop = asyncio.get_running_loop()
        keys = [
            (size_index, replica)
            for size_index in range(len(self.params.sizes))
            for replica in range(self.params.replicas)
        ]

        async def run_one(size_index: int, replica: int) -> Any:
            async with semaphore:
                N = self.params.sizes[size_index]
                return await loop.run_in_executor(None, partial(job, size_index, N, replica))

        outcomes = await asyncio.gather(*(run_one(*key) for key in keys), return_exceptions=True)
        results: dict[tuple[int, int], Any] = {}
        failures: list[ReplicaFailure] = []
        for (size_index, replica), outcome in zip(keys, outcomes):
            if isinstance(outcome, Exception):
                logger.error("Replica %d at N=%d failed: %s", replica, self.params.sizes[size_index], outcome)
                failures.append(
                    ReplicaFailure(self.params.sizes[size_index], replica, type(outcome).__name__, str(outcome))
                )
            else:
                results[(size_index, replica)] = outcome
        if failures and len(failures) == len(keys):
            detail: dict[str, Any] = {"failures": [failure.as_dict() for failure in failures]}
            causes = {type(outcome) for outcome in outcomes}
            if len(causes) == 1 and issubclass(next(iter(causes)), NUMERICAL_FAILURE_TYPES):
                detail["commonCause"] = next(iter(causes)).__name__
            raise ExperimentExecutionFailedError(f"All {len(keys)} replica runs failed.", detail)
        if failures:
            raise ExperimentError(
                f"{len(failures)} of {len(keys)} replica runs failed.",
                {"failures": [failure.as_dict() for failure in failures]},
            )
        return results

    def shift(self, energy: float) -> float:
        return float(energy) + self.params.energy_shift

    # Kinds

    async def schur(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        bound = spectral_bound(self.q)
        points = [complex(e, SCHUR_ETA) for e in np.linspace(1 - bound / 2, 1 + bound / 2, SCHUR_POINTS)]

        def job(size_index: int, N: int, replica: int) -> dict[str, float]:
            X, Y = sample_ensemble(self.ensemble(N), self.q.alpha_star, self.q.beta_star, replica, size_index)
            P = evaluate_model(self.q, X, Y)
            Hm = build_linearized_matrix(self.lin, X, Y)
            worst = 0.0
            for z in points:
                G11 = generalized_resolvent_block(Hm, z).G11
                R = np.linalg.inv(P - z * np.eye(N))
                worst = max(worst, float(np.abs(G11 - R).max() / np.abs(R).max()))
            return {"maxRelErr": worst, "wardResidual": ward_identity_residual(P, points[0])}

        outcomes = await self.run_replicas(job)
        per_size = []
        for size_index, N in enumerate(self.params.sizes):
            rows = [outcomes[(size_index, r)] for r in range(self.params.replicas)]
            per_size.append(
                {
                    "N": N,
                    "maxRelErr": max(row["maxRelErr"] for row in rows),
                    "maxWardResidual": max(row["wardResidual"] for row in rows),
                }
            )
        worst = max(entry["maxRelErr"] for entry in per_size)
        results = {
            "points": [[self.shift(z.real), z.imag] for z in points],
            "perSize": per_size,
            "maxRelErr": worst,
            "pass": worst <= 1e-10,
        }
        return results, []

    async def locallaw(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        context = await self.model_context()
        energy = context.bulk_maximum()
        eta_grids = {
            N: list(self.params.etas)
            if self.params.etas
            else [float(eta) for eta in np.geomspace(N ** (-1 + self.params.gamma), 1.0, self.params.n_etas)]
            for N in self.params.sizes
        }
        m1_cache: dict[float, complex] = {}
        for etas in eta_grids.values():
            for eta in etas:
                if eta not in m1_cache:
                    m1_cache[eta] = solve_del(self.lin, complex(energy, eta), self.options).m11

        def job(size_index: int, N: int, replica: int) -> list[tuple[float, float, float]]:
            P = self.sample_matrix(size_index, replica)
            eigenvalues, vectors = np.linalg.eigh(P)
            return [
                (eta, *spectral_stats(eigenvalues, vectors, complex(energy, eta), m1_cache[eta]))
                for eta in eta_grids[N]
            ]

        outcomes = await self.run_replicas(job)
        raw_rows: list[tuple[Any, ...]] = []
        table = []
        for size_index, N in enumerate(self.params.sizes):
            per_eta: dict[float, list[tuple[float, float]]] = {eta: [] for eta in eta_grids[N]}
            for replica in range(self.params.replicas):
                for eta, max_err, avg_err in outcomes[(size_index, replica)]:
                    per_eta[eta].append((max_err, avg_err))
                    raw_rows.append((N, eta, replica, max_err, avg_err))
            for eta, errors in per_eta.items():
                table.append(
                    {
                        "N": N,
                        "eta": eta,
                        "Neta": N * eta,
                        "medianMaxErr": float(np.median([e[0] for e in errors])),
                        "medianAvgErr": float(np.median([e[1] for e in errors])),
                    }
                )
        x = [row["Neta"] for row in table]
        entrywise = fit_loglog(x, [row["medianMaxErr"] for row in table], "entrywise")
        averaged = fit_loglog(x, [row["medianAvgErr"] for row in table], "averaged")
        results = {
            "E": self.shift(energy),
            "table": table,
            "entrywiseFit": entrywise.as_dict(),
            "averagedFit": averaged.as_dict(),
            "targets": {"entrywise": -0.5, "averaged": -1.0},
        }
        return results, raw_rows

    async def rigidity(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        energies = await self.experiment_energies()
        distribution = await self.distribution(energies)

        def job(size_index: int, N: int, replica: int) -> list[float]:
            eigenvalues = np.linalg.eigvalsh(self.sample_matrix(size_index, replica))
            return [abs(eigenvalues[eigenvalue_index(distribution, e, N) - 1] - e) for e in energies]

        outcomes = await self.run_replicas(job)
        per_size = []
        for size_index, N in enumerate(self.params.sizes):
            errors = [err for r in range(self.params.replicas) for err in outcomes[(size_index, r)]]
            per_size.append(
                {
                    "N": N,
                    "medianErr": float(np.median(errors)),
                    "maxErr": float(np.max(errors)),
                    "medianErrTimesN": float(np.median(errors)) * N,
                }
            )
        results: dict[str, Any] = {"energies": [self.shift(e) for e in energies], "perSize": per_size}
        if len(self.params.sizes) >= MIN_FIT_POINTS:
            results["fit"] = fit_loglog(self.params.sizes, [row["medianErr"] for row in per_size], "rigidity").as_dict()
            results["target"] = -1.0
        return results, []

    async def deloc(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        energies = await self.experiment_energies()
        distribution = await self.distribution(energies)
        size_count = len(self.params.sizes)

        def job(size_index: int, N: int, replica: int) -> list[tuple[float, float]]:
            _, vectors = np.linalg.eigh(self.sample_matrix(size_index, replica))
            rng = replica_rng(self.params.seed, replica, size_count + size_index)
            test_vectors = rng.standard_normal((N, self.params.overlap_vectors)) + 1j * rng.standard_normal(
                (N, self.params.overlap_vectors)
            )
            test_vectors /= np.linalg.norm(test_vectors, axis=0)
            rows = []
            for energy in energies:
                u = vectors[:, eigenvalue_index(distribution, energy, N) - 1]
                rows.append((float(np.abs(u).max()), float(np.abs(test_vectors.conj().T @ u).max())))
            return rows

        outcomes = await self.run_replicas(job)
        per_size = []
        for size_index, N in enumerate(self.params.sizes):
            rows = [row for r in range(self.params.replicas) for row in outcomes[(size_index, r)]]
            per_size.append(
                {
                    "N": N,
                    "medianSupNorm": float(np.median([row[0] for row in rows])),
                    "medianOverlap": float(np.median([row[1] for row in rows])),
                    "reference": 10 * math.sqrt(math.log(N) / N),
                }
            )
        results: dict[str, Any] = {"energies": [self.shift(e) for e in energies], "perSize": per_size}
        if len(self.params.sizes) >= MIN_FIT_POINTS:
            sizes = self.params.sizes
            results["supNormFit"] = fit_loglog(sizes, [row["medianSupNorm"] for row in per_size], "supNorm").as_dict()
            results["overlapFit"] = fit_loglog(sizes, [row["medianOverlap"] for row in per_size], "overlap").as_dict()
            results["target"] = -0.5
        return results, []

    async def speed(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        first_moment = limiting_moments(hermitize(self.q), 1)[1]

        def job(size_index: int, N: int, replica: int) -> float:
            P = self.sample_matrix(size_index, replica)
            return float(abs(np.trace(P).real / N - first_moment))

        outcomes = await self.run_replicas(job)
        per_size = [
            {
                "N": N,
                "meanErr": float(np.mean([outcomes[(i, r)] for r in range(self.params.replicas)])),
            }
            for i, N in enumerate(self.params.sizes)
        ]
        fit = fit_loglog(self.params.sizes, [row["meanErr"] for row in per_size], "speed")
        results = {
            "firstMoment": first_moment + self.params.energy_shift,
            "perSize": per_size,
            "fit": fit.as_dict(),
            "target": -1.0,
        }
        return results, []

    async def globaldos(self) -> tuple[dict[str, Any], list[tuple[Any, ...]]]:
        edges = np.linspace(*self.energy_window(), self.params.bins + 1)
        distribution = await self.distribution(edges)
        expected = np.diff(distribution(edges)) / np.diff(edges)
        mean_energy = limiting_moments(hermitize(self.q), 1)[1]

        def job(size_index: int, N: int, replica: int) -> np.ndarray:
            return np.linalg.eigvalsh(self.sample_matrix(size_index, replica))

        outcomes = await self.run_replicas(job)
        per_size = []
        for size_index, N in enumerate(self.params.sizes):
            pooled = np.concatenate([outcomes[(size_index, r)] for r in range(self.params.replicas)])
            counts, _ = np.histogram(pooled, bins=edges)
            observed = counts / (pooled.size * np.diff(edges))
            per_size.append(
                {
                    "N": N,
                    "supBinDiscrepancy": float(np.abs(observed - expected).max()),
                    "outsideRange": int(pooled.size - counts.sum()),
                }
            )
        results = {
            "binEdges": [self.shift(e) for e in edges],
            "expectedDensity": [float(v) for v in expected],
            "mass": distribution.mass,
            "meanEnergy": mean_energy + self.params.energy_shift,
            "perSize": per_size,
        }
        return results, []

    async def run(self, kind: str) -> ExperimentReport:
        handlers: dict[str, Callable[[], Awaitable[tuple[dict[str, Any], list[tuple[Any, ...]]]]]] = {
            "schur": self.schur,
            "locallaw": self.locallaw,
            "rigidity": self.rigidity,
            "deloc": self.deloc,
            "speed": self.speed,
            "globaldos": self.globaldos,
        }
        if kind not in handlers:
            raise ExperimentError(f"Unknown experiment kind {kind!r}.")
        started = time.perf_counter()
        logger.info("Running %s experiment: sizes=%s replicas=%d seed=%d", kind, self.params.sizes, self.params.replicas, self.params.seed)
        results, raw_rows = await handlers[kind]()
        elapsed = time.perf_counter() - started
        parameters = {
            **self.params.as_dict(),
            "m": self.lin.m,
            "alphaStar": self.q.alpha_star,
            "betaStar": self.q.beta_star,
        }
        return ExperimentReport(kind, parameters, results, {"wallClockSeconds": elapsed}, raw_rows)


async def run_experiment_async(
    kind: str,
    lin: AnyLinearization,
    q: NCPolynomial,
    params: ExperimentParams,
    options: Optional[SolverOptions] = None,
) -> ExperimentReport:
    return await ExperimentRunner(lin, q, params, options).run(kind)


def run_experiment(
    kind: str,
    lin: AnyLinearization,
    q: NCPolynomial,
    params: ExperimentParams,
    options: Optional[SolverOptions] = None,
) -> ExperimentReport:
    """Run one experiment kind; results depend only on (kind, params, seed)."""
    return asyncio.run(run_experiment_async(kind, lin, q, params, options))
