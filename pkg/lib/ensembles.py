"""
Ensembles - Toolkit Module
Random matrix samples, the linearized (Kronecker) matrix and its
generalized resolvent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence, get_args

import numpy as np
from scipy import linalg as sla

from lib.errors import ResolventError, UsageError
from lib.linearize import AnyLinearization, Linearization, as_linearization
from lib.ncpoly import NCPolynomial, Symbol, evaluate, hermitize

logger = logging.getLogger(__name__)

EntryLaw = Literal["complex-gaussian", "real-gaussian", "bernoulli"]
ENTRY_LAWS: tuple[str, ...] = get_args(EntryLaw)
HERMITIAN_TOL = 1e-12
PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class EnsembleConfig:
    N: int
    law: EntryLaw = "complex-gaussian"
    seed: int = 0
    replicas: int = 1

    def __post_init__(self) -> None:
        if self.N < 2:
            raise UsageError("Matrix size N must be at least 2.")
        if self.law not in ENTRY_LAWS:
            raise UsageError(f"Unknown entry law {self.law!r}; expected one of {', '.join(ENTRY_LAWS)}.")
        if self.replicas < 1:
            raise UsageError("replicas must be at least 1.")
        if self.seed < 0:
            raise UsageError("seed must be non-negative.")


def replica_rng(seed: int, replica: int, point: int = 0) -> np.random.Generator:
    """Independent stream per (replica, point) derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica, point)))


def _wigner(rng: np.random.Generator, N: int, law: str) -> np.ndarray:
    if law == "complex-gaussian":
        A = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
        return (A + A.conj().T) / np.sqrt(2 * N)
    if law == "real-gaussian":
        A = rng.standard_normal((N, N))
        return ((A + A.T) / np.sqrt(2 * N)).astype(complex)
    signs = rng.choice([-1.0, 1.0], size=(N, N))
    upper = np.triu(signs)
    return ((upper + np.triu(signs, 1).T) / np.sqrt(N)).astype(complex)


def _iid(rng: np.random.Generator, N: int, law: str) -> np.ndarray:
    if law == "complex-gaussian":
        return (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2 * N)
    if law == "real-gaussian":
        return (rng.standard_normal((N, N)) / np.sqrt(N)).astype(complex)
    return (rng.choice([-1.0, 1.0], size=(N, N)) / np.sqrt(N)).astype(complex)


def sample_ensemble(
    cfg: EnsembleConfig,
    alpha_star: int,
    beta_star: int,
    replica: int = 0,
    point: int = 0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Hermitian X_1..X_a and general Y_1..Y_b with entry variance 1/N."""
    rng = replica_rng(cfg.seed, replica, point)
    X = [_wigner(rng, cfg.N, cfg.law) for _ in range(alpha_star)]
    Y = [_iid(rng, cfg.N, cfg.law) for _ in range(beta_star)]
    return X, Y


def sample_assignment(X: Sequence[np.ndarray], Y: Sequence[np.ndarray]) -> dict[Symbol, np.ndarray]:
    assignment: dict[Symbol, np.ndarray] = {Symbol.x(a + 1): x for a, x in enumerate(X)}
    assignment.update({Symbol.y(b + 1): y for b, y in enumerate(Y)})
    return assignment


def evaluate_model(q: NCPolynomial, X: Sequence[np.ndarray], Y: Sequence[np.ndarray]) -> np.ndarray:
    """P = 1 - q at the samples, hermitian-symmetrized."""
    N = (X[0] if X else Y[0]).shape[0]
    p = NCPolynomial.constant(1.0, q.alpha_star, q.beta_star) - q
    P = evaluate(p, sample_assignment(X, Y), size=N)
    return (P + P.conj().T) / 2


@dataclass(frozen=True, eq=False)
class LinearizedMatrix:
    H: np.ndarray
    linearization: Linearization
    N: int

    @property
    def m(self) -> int:
        return self.linearization.m


def build_linearized_matrix(
    lin: AnyLinearization,
    X: Sequence[np.ndarray],
    Y: Sequence[np.ndarray] = (),
) -> LinearizedMatrix:
    """H = K0 x I - sum K_a x X_a - sum (L_b x Y_b + L_b^* x Y_b^*)."""
    pencil = as_linearization(lin)
    if len(X) != pencil.alpha_star or len(Y) != pencil.beta_star:
        raise UsageError(
            f"Pencil needs {pencil.alpha_star} hermitian and {pencil.beta_star} general samples; "
            f"got {len(X)} and {len(Y)}."
        )
    sizes = {sample.shape for sample in [*X, *Y]}
    if len(sizes) > 1:
        raise UsageError("All samples must share one square shape.")
    N = next(iter(sizes))[0] if sizes else 1
    H = np.kron(pencil.K0, np.eye(N, dtype=complex))
    for K, x in zip(pencil.K, X):
        H -= np.kron(K, x)
    for L, y in zip(pencil.L, Y):
        H -= np.kron(L, y) + np.kron(L.conj().T, y.conj().T)
    asymmetry = float(np.abs(H - H.conj().T).max(initial=0.0))
    if asymmetry > HERMITIAN_TOL * max(1.0, float(np.abs(H).max())):
        logger.warning("Linearized matrix deviates from hermitian by %.2e", asymmetry)
    return LinearizedMatrix((H + H.conj().T) / 2, pencil, N)


@dataclass(frozen=True, eq=False)
class GeneralizedResolvent:
    z: complex
    G11: np.ndarray
    site_blocks: np.ndarray

    def as_dict(self) -> dict[str, object]:
        trace = complex(np.trace(self.G11)) / self.G11.shape[0]
        return {"z": [self.z.real, self.z.imag], "normalizedTrace": [trace.real, trace.imag]}


def generalized_resolvent_block(Hm: LinearizedMatrix, z: complex) -> GeneralizedResolvent:
    """Top-left N x N block and per-site m x m blocks of (H - zJ x I)^-1."""
    z = complex(z)
    if z.imag <= 0:
        raise UsageError("Generalized resolvent needs Im z > 0.")
    N, m = Hm.N, Hm.m
    system = Hm.H.copy()
    system[np.arange(N), np.arange(N)] -= z
    lu, piv = sla.lu_factor(system, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(pivots)) or pivots.min() <= PIVOT_TOL * max(1.0, pivots.max()):
        raise ResolventError(
            f"Generalized resolvent system is singular at z={z}.",
            {"z": [z.real, z.imag], "minPivot": float(pivots.min())},
        )
    G = sla.lu_solve((lu, piv), np.eye(m * N, dtype=complex))
    sites = np.arange(N)
    blocks = G.reshape(m, N, m, N)[:, sites, :, sites]
    return GeneralizedResolvent(z, G[:N, :N], blocks)


def hermitian_resolvent(P: np.ndarray, z: complex) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(P)
    return (vectors / (eigenvalues - z)) @ vectors.conj().T


def resolvent_stats(P: np.ndarray, z: complex, m1: complex) -> tuple[float, float]:
    """(max_ij |R_ij - m1 delta_ij|, |Tr R / N - m1|) for R = (P - z)^-1."""
    z = complex(z)
    if z.imag <= 0:
        raise UsageError("Resolvent statistics need Im z > 0.")
    R = hermitian_resolvent(P, z)
    N = P.shape[0]
    deviation = R - m1 * np.eye(N)
    return float(np.abs(deviation).max()), float(abs(np.trace(R) / N - m1))


def spectral_stats(eigenvalues: np.ndarray, vectors: np.ndarray, z: complex, m1: complex) -> tuple[float, float]:
    """resolvent_stats from a precomputed eigendecomposition."""
    R = (vectors / (eigenvalues - z)) @ vectors.conj().T
    N = eigenvalues.shape[0]
    return float(np.abs(R - m1 * np.eye(N)).max()), float(abs(np.mean(1 / (eigenvalues - z)) - m1))


def ward_identity_residual(P: np.ndarray, z: complex) -> float:
    """max_i |sum_j |R_ij|^2 - Im R_ii / eta| for the hermitian resolvent."""
    z = complex(z)
    R = hermitian_resolvent(P, z)
    lhs = np.sum(np.abs(R) ** 2, axis=1)
    rhs = np.diag(R).imag / z.imag
    return float(np.abs(lhs - rhs).max())


def spectral_bound(q: NCPolynomial) -> float:
    """Operator-norm bound for 1 - q at semicircular and circular arguments."""
    qt = hermitize(q) if q.has_general_symbols() else q
    return 1.0 + sum(abs(c) * 2.0 ** len(word) for word, c in qt.items())
