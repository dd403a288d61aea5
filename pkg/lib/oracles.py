"""
Oracles - Toolkit Module
Closed-form reductions of the Dyson equation for two worked models:
homogeneous quadratic forms x^t Xi x and the product y_1...y_b y_b^*...y_1^*.
Also reference densities for cross-checks.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg as sla

from lib.errors import OracleError, RootSelectionError, UsageError

logger = logging.getLogger(__name__)

ADMISSIBLE_IM = 1e-12
ROOT_SEPARATION = 1e-12
EIGENVALUE_CLUSTER_TOL = 1e-9
CONTINUATION_STEPS = 240


def _admissible(roots: np.ndarray) -> list[complex]:
    return [complex(r) for r in roots if r.imag > ADMISSIBLE_IM]


def _select_root(equation: Callable[[complex], Polynomial], z: complex) -> complex:
    """
    Root of equation(z) with positive imaginary part.

    With several candidates the root is tracked from far up the imaginary
    axis, where it sits next to 1/(1 - z), down to the requested point.
    """
    candidates = _admissible(equation(z).roots())
    if not candidates:
        raise OracleError(
            f"No root with positive imaginary part at z={z}; the point lies off the spectrum.",
            {"z": [z.real, z.imag]},
        )
    if len(candidates) == 1:
        return candidates[0]

    start_eta = 1e3 * (1.0 + abs(z))
    end_eta = max(z.imag, 1e-14)
    path = np.geomspace(start_eta, end_eta, CONTINUATION_STEPS)
    z_start = complex(z.real, path[0])
    current = min(equation(z_start).roots(), key=lambda r: abs(r - 1 / (1 - z_start)))
    for eta in path[1:]:
        roots = equation(complex(z.real, eta)).roots()
        current = min(roots, key=lambda r: abs(r - current))
    chosen = min(candidates, key=lambda r: abs(r - current))

    rivals = [r for r in candidates if r is not chosen and abs(r.imag - chosen.imag) < ROOT_SEPARATION]
    if rivals:
        raise RootSelectionError(
            f"Two admissible roots at z={z} cannot be separated.",
            {"z": [z.real, z.imag], "roots": [[r.real, r.imag] for r in [chosen, *rivals]]},
        )
    logger.debug("Selected root %s among %d candidates at z=%s", chosen, len(candidates), z)
    return chosen


def _unique_eigenvalues(values: np.ndarray) -> list[tuple[float, int]]:
    clusters: list[tuple[float, int]] = []
    for value in np.sort(values):
        if clusters and abs(value - clusters[-1][0]) <= EIGENVALUE_CLUSTER_TOL * max(1.0, abs(value)):
            center, count = clusters[-1]
            clusters[-1] = (center, count + 1)
        else:
            clusters.append((float(value), 1))
    return clusters


def quadratic_form_equation(Xi: np.ndarray) -> Callable[[complex], Polynomial]:
    """Cleared-denominator form of 1 + (z - 1) m + m Tr (Xi^-1 - m)^-1 = 0."""
    Xi = np.asarray(Xi, dtype=complex)
    if Xi.ndim != 2 or Xi.shape[0] != Xi.shape[1]:
        raise UsageError("Xi must be a square matrix.")
    if np.abs(Xi - Xi.conj().T).max() > 1e-12 * max(1.0, np.abs(Xi).max()):
        raise UsageError("Xi must be hermitian.")
    singular_values = sla.svdvals(Xi)
    if singular_values.min() <= 1e-12 * max(1.0, singular_values.max()):
        raise UsageError("Xi must be invertible.")
    clusters = _unique_eigenvalues(np.linalg.eigvalsh(np.linalg.inv(Xi)))
    factors = [Polynomial([a, -1.0]) for a, _ in clusters]
    m = Polynomial([0.0, 1.0])

    def equation(z: complex) -> Polynomial:
        head = Polynomial([1.0, z - 1.0])
        for factor in factors:
            head = head * factor
        tail = Polynomial([0.0])
        for j, (_, multiplicity) in enumerate(clusters):
            term = Polynomial([float(multiplicity)])
            for k, factor in enumerate(factors):
                if k != j:
                    term = term * factor
            tail = tail + term
        return head + m * tail

    return equation


def oracle_quadratic_form(Xi: np.ndarray, z: complex) -> tuple[complex, np.ndarray]:
    """(m1, M_hat) for q = x^t Xi x with M_hat = (Xi^-1 - m1)^-1."""
    z = complex(z)
    equation = quadratic_form_equation(Xi)
    m1 = _select_root(equation, z)
    Xi_inv = np.linalg.inv(np.asarray(Xi, dtype=complex))
    M_hat = np.linalg.inv(Xi_inv - m1 * np.eye(Xi_inv.shape[0]))
    return m1, M_hat


def quadratic_form_solution_matrix(m1: complex, M_hat: np.ndarray) -> np.ndarray:
    """Block-diagonal M = diag(m1, M_hat) of the quadratic-form pencil."""
    gamma = M_hat.shape[0]
    M = np.zeros((gamma + 1, gamma + 1), dtype=complex)
    M[0, 0] = m1
    M[1:, 1:] = M_hat
    return M


def product_equation(beta_star: int) -> Callable[[complex], Polynomial]:
    """zeta^b m^(b+1) - zeta m + 1 with zeta = 1 - z."""
    if beta_star < 1:
        raise UsageError("Product model needs beta* >= 1.")

    def equation(z: complex) -> Polynomial:
        zeta = 1 - z
        coefficients = np.zeros(beta_star + 2, dtype=complex)
        coefficients[0] = 1.0
        coefficients[1] = -zeta
        coefficients[beta_star + 1] = zeta**beta_star
        return Polynomial(coefficients)

    return equation


def product_entries(beta_star: int, z: complex, m1: complex) -> tuple[complex, ...]:
    zeta = 1 - complex(z)
    entries = [complex(m1)]
    entries += [zeta ** (j - 1) * m1**j for j in range(2, beta_star + 1)]
    entries += [(zeta * m1) ** (b + 1) for b in range(beta_star)]
    return tuple(entries)


def oracle_product(beta_star: int, z: complex) -> tuple[complex, ...]:
    """(m_1, ..., m_{2 beta*}) of the product model at z."""
    z = complex(z)
    m1 = _select_root(product_equation(beta_star), z)
    return product_entries(beta_star, z, m1)


def product_solution_matrix(beta_star: int, z: complex, m1: complex) -> np.ndarray:
    """Full M for the product pencil from its first diagonal entry."""
    entries = product_entries(beta_star, z, m1)
    size = 2 * beta_star
    M = np.diag(np.array(entries, dtype=complex))
    for j in range(2, size + 1):
        if j != beta_star + 1:
            M[j - 1, size + 2 - j - 1] = entries[beta_star]
    return M


def product_stability_determinant(beta_star: int, z: complex, m1: complex) -> complex:
    """Closed form of det of the stability matrix of the product pencil."""
    w = (1 - complex(z)) * m1
    sign = (-1) ** beta_star
    return sign * ((beta_star + 1) * (-w) ** beta_star + w**2 * beta_star * (-w) ** (beta_star - 1))


def product_edge(beta_star: int) -> tuple[complex, complex]:
    """(z, m1) at the spectral edge where the stability determinant vanishes."""
    zeta = (beta_star + 1) ** (beta_star + 1) / beta_star**beta_star
    m1 = (beta_star / (beta_star + 1)) ** beta_star / beta_star
    return complex(1 - zeta), complex(m1)


def semicircle_density(energies: Sequence[float] | float, center: float = 1.0, radius: float = 2.0) -> np.ndarray:
    t = np.asarray(energies, dtype=float) - center
    inside = np.clip(radius**2 - t**2, 0.0, None)
    return 2 * np.sqrt(inside) / (np.pi * radius**2)


def marchenko_pastur_density(x: Sequence[float] | float) -> np.ndarray:
    """Density of y y^* for a square matrix with unit-variance entries, support (0, 4)."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 4)
    safe = np.where(inside, x, 1.0)
    return np.where(inside, np.sqrt(np.clip(safe * (4 - safe), 0.0, None)) / (2 * np.pi * safe), 0.0)


def product_density(energies: Sequence[float] | float) -> np.ndarray:
    """Density of 1 - y y^* for the single-factor product model."""
    return marchenko_pastur_density(1 - np.asarray(energies, dtype=float))
