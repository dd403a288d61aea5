"""
Free Probability - Toolkit Module
Exact moments of polynomials in free semicircular elements and the
truncated Stieltjes expansion of M11 built from them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Any, Iterable, Union

import numpy as np

from lib.errors import AlphabetError, MomentGuardError, NotSelfAdjointError, TailNotDecayingError, UsageError
from lib.linearize import series_automaton
from lib.ncpoly import NCPolynomial, Symbol, SymbolKind, Word, hermitize

logger = logging.getLogger(__name__)

EXPANSION_GUARD = 20
FOCK_DIMENSION_GUARD = 4_000_000
TAIL_TOL = 1e-9
SELF_ADJOINT_TOL = 1e-12

Label = Union[int, Symbol]


def _labels(word: Iterable[Label]) -> tuple[int, ...]:
    labels: list[int] = []
    for letter in word:
        if isinstance(letter, Symbol):
            if letter.kind != SymbolKind.HERMITIAN_X:
                raise AlphabetError("Semicircular words use hermitian symbols only.")
            labels.append(letter.index)
        else:
            labels.append(int(letter))
    return tuple(labels)


def semicircular_word_moment(word: Iterable[Label]) -> int:
    """Number of non-crossing pairings of the positions that pair equal labels."""
    labels = _labels(word)
    if len(labels) % 2:
        return 0

    @lru_cache(maxsize=None)
    def count(start: int, stop: int) -> int:
        if start == stop:
            return 1
        total = 0
        for partner in range(start + 1, stop, 2):
            if labels[partner] == labels[start]:
                inner = count(start + 1, partner)
                if inner:
                    total += inner * count(partner + 1, stop)
        return total

    return count(0, len(labels))


@dataclass(frozen=True)
class MomentTable:
    moments: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.moments or abs(self.moments[0] - 1.0) > 1e-12:
            raise ValueError("Moment table must start with tau(1) = 1.")

    @property
    def k_max(self) -> int:
        return len(self.moments) - 1

    def __getitem__(self, k: int) -> float:
        return self.moments[k]

    def shifted(self, shift: float) -> "MomentTable":
        """Moments of X + shift from those of X (binomial expansion)."""
        if shift == 0:
            return self
        moments = tuple(
            float(sum(comb(k, j) * shift ** (k - j) * self.moments[j] for j in range(k + 1)))
            for k in range(self.k_max + 1)
        )
        return MomentTable(moments)

    def rows(self) -> list[tuple[int, float]]:
        return list(enumerate(self.moments))

    def as_dict(self) -> dict[str, Any]:
        return {"kMax": self.k_max, "moments": list(self.moments)}


def _prepare(qt: NCPolynomial) -> NCPolynomial:
    if qt.has_general_symbols():
        qt = hermitize(qt)
    if not qt.is_self_adjoint(tol=SELF_ADJOINT_TOL):
        raise NotSelfAdjointError("Moments need a self-adjoint polynomial.")
    return qt


def limiting_moments(qt: NCPolynomial, k_max: int) -> MomentTable:
    """tau((1 - qt)^k) for k = 0..k_max by symbolic expansion."""
    if k_max < 0:
        raise UsageError("k_max must be non-negative.")
    qt = _prepare(qt)
    if k_max * max(qt.degree, 1) > EXPANSION_GUARD:
        raise MomentGuardError(
            f"Expansion of degree {k_max * qt.degree} exceeds the guard of {EXPANSION_GUARD}.",
            {"kMax": k_max, "degree": qt.degree},
        )
    p = NCPolynomial.constant(1.0, qt.alpha_star, 0) - qt
    power = NCPolynomial.constant(1.0, qt.alpha_star, 0)
    moments = [1.0]
    for _ in range(k_max):
        power = power * p
        value = sum(coeff * semicircular_word_moment(word) for word, coeff in power.items())
        moments.append(float(complex(value).real))
    return MomentTable(tuple(moments))


class _FockVector:
    """Vector in the full Fock space over C^gamma, stored level by level."""

    def __init__(self, gamma: int, levels: list[np.ndarray]) -> None:
        self.gamma = gamma
        self.levels = levels

    @classmethod
    def vacuum(cls, gamma: int) -> "_FockVector":
        return cls(gamma, [np.ones(1, dtype=complex)])

    def semicircular(self, letter: int) -> "_FockVector":
        gamma = self.gamma
        depth = len(self.levels)
        out = [np.zeros(gamma**level, dtype=complex) for level in range(depth + 1)]
        for level, vector in enumerate(self.levels):
            width = gamma**level
            out[level + 1][letter * width : (letter + 1) * width] += vector
            if level > 0:
                below = gamma ** (level - 1)
                out[level - 1] += vector[letter * below : (letter + 1) * below]
        return _FockVector(gamma, out)

    def apply_word(self, word: Word) -> "_FockVector":
        vector = self
        for symbol in reversed(word):
            vector = vector.semicircular(symbol.index - 1)
        return vector

    def axpy(self, coeff: complex, other: "_FockVector") -> None:
        while len(self.levels) < len(other.levels):
            self.levels.append(np.zeros(self.gamma ** len(self.levels), dtype=complex))
        for level, vector in enumerate(other.levels):
            self.levels[level] += coeff * vector

    def inner(self, other: "_FockVector") -> complex:
        return complex(sum(np.vdot(a, b) for a, b in zip(self.levels, other.levels)))


def fock_moments(qt: NCPolynomial, k_max: int) -> MomentTable:
    """tau((1 - qt)^k) through the Fock-space model of the semicircular system."""
    if k_max < 0:
        raise UsageError("k_max must be non-negative.")
    qt = _prepare(qt)
    gamma = max(qt.alpha_star, 1)
    half = (k_max + 1) // 2
    top_level = half * max(qt.degree, 0)
    dimension = sum(gamma**level for level in range(top_level + 1))
    if dimension > FOCK_DIMENSION_GUARD:
        raise MomentGuardError(
            f"Fock space of dimension {dimension} exceeds the guard of {FOCK_DIMENSION_GUARD}.",
            {"kMax": k_max, "degree": qt.degree, "alphabet": gamma},
        )

    terms = list(qt.items())
    powers = [_FockVector.vacuum(gamma)]
    for _ in range(half):
        current = powers[-1]
        image = _FockVector(gamma, [level.copy() for level in current.levels])
        for word, coeff in terms:
            image.axpy(-coeff, current.apply_word(word))
        powers.append(image)

    moments = []
    for k in range(k_max + 1):
        left, right = powers[k // 2], powers[k - k // 2]
        moments.append(left.inner(right).real)
    return MomentTable(tuple(moments))


def automaton_moments(qt: NCPolynomial, k_max: int) -> MomentTable:
    """
    tau((1 - qt)^k) for k = 0..k_max from the series automaton of qt.

    With transitions T_g, S = sum_g T_g (x) s_g is an operator-valued
    semicircular element and G = E[(I - S)^-1] solves G = I + eta(G) G with
    eta(B) = sum_g T_g B T_g. Marking every return to the root state with t
    turns G[0, 0] into the generating series of tau(q^n); its coefficients are
    solved order by order. Transitions that leave the root are strictly upper
    triangular, so each order is an exact finite recursion.
    """
    if k_max < 0:
        raise UsageError("k_max must be non-negative.")
    qt = _prepare(qt)
    offset = float(complex(qt.constant_term).real)
    root, transitions = series_automaton(qt - offset)
    n = root.size
    identity = np.eye(n, dtype=complex)
    if transitions:
        stacked = np.stack(transitions)
    else:
        stacked = np.zeros((0, n, n), dtype=complex)
    returning = np.zeros_like(stacked)
    returning[:, :, 0] = stacked[:, :, 0]
    forward = stacked - returning

    def eta(left: np.ndarray, middle: np.ndarray, right: np.ndarray) -> np.ndarray:
        return np.einsum("gab,bc,gcd->ad", left, middle, right)

    zero = np.zeros((n, n), dtype=complex)
    base = identity
    for _ in range(n + 1):
        base = identity + eta(forward, base, forward) @ base
    coefficients = [base]
    covariances = [eta(forward, base, forward)]
    forward_base = np.einsum("gab,bc->gac", forward, base)

    for order in range(1, k_max + 1):
        previous = coefficients[order - 1]
        before = coefficients[order - 2] if order >= 2 else zero
        partial = eta(returning, previous, forward) + eta(forward, previous, returning) + eta(returning, before, returning)
        rhs = partial @ base
        for inner in range(1, order):
            rhs = rhs + covariances[inner] @ coefficients[order - inner]
        current = rhs
        for _ in range(n):
            current = rhs + np.einsum("gab,bc,gcd->ad", forward, current, forward_base) + covariances[0] @ current
        coefficients.append(current)
        covariances.append(eta(forward, current, forward) + partial)

    moments = tuple(float(((-1) ** order * coefficients[order][0, 0]).real) for order in range(k_max + 1))
    return MomentTable(moments).shifted(1.0 - offset)


def stieltjes_tail_oracle(qt: NCPolynomial, z: complex, D: int = 20, tail_tol: float = TAIL_TOL) -> complex:
    """-sum_{k<=D} tau((1 - qt)^k) / z^(k+1), the large-|z| expansion of M11."""
    z = complex(z)
    if z == 0:
        raise UsageError("Spectral parameter must be nonzero.")
    table = automaton_moments(qt, D)
    terms = np.array([table[k] / z ** (k + 1) for k in range(D + 1)])
    if abs(terms[-1]) > tail_tol:
        raise TailNotDecayingError(
            f"Last series term {abs(terms[-1]):.3e} exceeds {tail_tol:.1e}; |z| is too small.",
            {"z": [z.real, z.imag], "D": D, "lastTerm": float(abs(terms[-1]))},
        )
    return complex(-terms.sum())


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)

