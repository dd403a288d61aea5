"""
Linearize - Toolkit Module
Self-adjoint linearizations of noncommutative polynomials.

A pencil K0 - sum_g K_g x_g realizes (1 - q)^-1 through the word
coefficients <K0^-1 e1, A_w e1> with A_g = K_g K0^-1. This module builds the
standard pencil, reduces it to minimal size and certifies correctness,
minimality and nilpotency.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import linalg as sla

from lib.errors import AlphabetError, NotSelfAdjointError, RankAmbiguityError, UsageError
from lib.ncpoly import (
    INV_SQRT2,
    NCPolynomial,
    Symbol,
    Word,
    hermitize,
    inverse_series,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
RANK_AMBIGUITY_FACTOR = 10.0
VERIFY_TOL = 1e-10
HERMITIAN_TOL = 1e-14
NORMALIZATION_TOL = 1e-10
INVERTIBILITY_TOL = 1e-12
SELF_ADJOINT_TOL = 1e-12
EXHAUSTIVE_WORD_BUDGET = 4_096

BlockStyle = Literal["padded", "compact"]
LetterWord = tuple[int, ...]


class _Pencil:
    """Derived geometry shared by both pencil representations."""

    K0: np.ndarray

    @property
    def m(self) -> int:
        return int(self.K0.shape[0])

    def hermitian_family(self) -> tuple[np.ndarray, ...]:
        raise NotImplementedError

    @property
    def gamma_star(self) -> int:
        return len(self.hermitian_family())

    @cached_property
    def K0_inv(self) -> np.ndarray:
        return np.linalg.inv(self.K0)

    @cached_property
    def e1(self) -> np.ndarray:
        vector = np.zeros(self.m, dtype=complex)
        vector[0] = 1.0
        return vector

    @cached_property
    def J(self) -> np.ndarray:
        return np.outer(self.e1, self.e1)

    @cached_property
    def pi(self) -> np.ndarray:
        return self.J @ self.K0_inv

    @cached_property
    def pi_prime(self) -> np.ndarray:
        return np.eye(self.m) - self.pi

    @cached_property
    def A(self) -> tuple[np.ndarray, ...]:
        return tuple(K @ self.K0_inv for K in self.hermitian_family())

    @cached_property
    def stacked_family(self) -> np.ndarray:
        family = self.hermitian_family()
        if not family:
            return np.zeros((0, self.m, self.m), dtype=complex)
        return np.stack(family)

    def invariant_violations(self) -> list[str]:
        problems: list[str] = []
        if np.max(np.abs(self.K0 - self.K0.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.abs(self.K0).max()):
            problems.append("K0 is not hermitian")
        singular_values = sla.svdvals(self.K0)
        if singular_values.min() <= INVERTIBILITY_TOL * singular_values.max():
            problems.append("K0 is not invertible")
            return problems
        if abs(self.K0_inv[0, 0] - 1.0) > NORMALIZATION_TOL:
            problems.append("<e1, K0^-1 e1> differs from 1")
        if np.max(np.abs(self.pi @ self.pi - self.pi)) > 1e-12 * max(1.0, np.abs(self.pi).max()):
            problems.append("pi is not idempotent")
        return problems


def _as_matrix(value: Any, m: Optional[int], label: str) -> np.ndarray:
    array = np.array(value, dtype=complex)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise UsageError(f"{label} must be a square matrix.")
    if m is not None and array.shape[0] != m:
        raise UsageError(f"{label} has dimension {array.shape[0]}, expected {m}.")
    return array


@dataclass(frozen=True, eq=False)
class SymmetrizedLinearization(_Pencil):
    """Pencil K0 - sum_g K_g x_g over hermitian symbols only."""

    K0: np.ndarray
    K: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        K0 = _as_matrix(self.K0, None, "K0")
        object.__setattr__(self, "K0", K0)
        object.__setattr__(
            self, "K", tuple(_as_matrix(k, K0.shape[0], f"K{i + 1}") for i, k in enumerate(self.K))
        )

    def hermitian_family(self) -> tuple[np.ndarray, ...]:
        return self.K

    def symmetrized(self) -> "SymmetrizedLinearization":
        return self


@dataclass(frozen=True, eq=False)
class Linearization(_Pencil):
    """Pencil K0 - sum_a K_a x_a - sum_b (L_b y_b + L_b^* y_b^*)."""

    K0: np.ndarray
    K: tuple[np.ndarray, ...] = ()
    L: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        K0 = _as_matrix(self.K0, None, "K0")
        m = K0.shape[0]
        object.__setattr__(self, "K0", K0)
        object.__setattr__(self, "K", tuple(_as_matrix(k, m, f"K{i + 1}") for i, k in enumerate(self.K)))
        object.__setattr__(self, "L", tuple(_as_matrix(l, m, f"L{i + 1}") for i, l in enumerate(self.L)))

    @property
    def alpha_star(self) -> int:
        return len(self.K)

    @property
    def beta_star(self) -> int:
        return len(self.L)

    @cached_property
    def _symmetrized(self) -> SymmetrizedLinearization:
        real_parts = [(L + L.conj().T) * INV_SQRT2 for L in self.L]
        imag_parts = [1j * (L - L.conj().T) * INV_SQRT2 for L in self.L]
        return SymmetrizedLinearization(self.K0, tuple(self.K) + tuple(real_parts) + tuple(imag_parts))

    def symmetrized(self) -> SymmetrizedLinearization:
        return self._symmetrized

    def hermitian_family(self) -> tuple[np.ndarray, ...]:
        return self._symmetrized.K


AnyLinearization = Union[Linearization, SymmetrizedLinearization]


def as_linearization(lin: AnyLinearization) -> Linearization:
    if isinstance(lin, Linearization):
        return lin
    return Linearization(lin.K0, lin.K, ())


def split_variables(lsym: SymmetrizedLinearization, alpha_star: int, beta_star: int) -> Linearization:
    """Recover L_b = (K_{a*+b} - i K_{a*+b*+b}) / sqrt(2) from a hermitian pencil."""
    if alpha_star < 0 or beta_star < 0 or lsym.gamma_star != alpha_star + 2 * beta_star:
        raise AlphabetError(
            f"Pencil has {lsym.gamma_star} hermitian symbols; expected "
            f"alpha* + 2 beta* = {alpha_star + 2 * beta_star}."
        )
    K = lsym.K
    L = tuple(
        (K[alpha_star + b] - 1j * K[alpha_star + beta_star + b]) * INV_SQRT2
        for b in range(beta_star)
    )
    return Linearization(lsym.K0, K[:alpha_star], L)


# Standard construction


def _basic_block(word: Word, block: BlockStyle) -> tuple[int, list[tuple[int, int, int]], list[tuple[int, int]], list[tuple[int, int]]]:
    """
    Affine pattern of the basic block realizing a monomial as -d U^-1 b.

    Returns (n, U entries (row, col, letter or -1 for the constant -1),
    d entries (col, letter), b entries (row, letter)) with 0-based letters.
    """
    letters = [symbol.index - 1 for symbol in word]
    k = len(letters)
    n = k - 1
    u_entries: list[tuple[int, int, int]] = []
    for i in range(n):
        u_entries.append((i, n - 1 - i, -1))
    for i in range(n - 1):
        u_entries.append((i, n - 2 - i, letters[i + 1]))
    if block == "padded":
        u_entries.append((n, n, -1))
        n += 1
    d_entries = [(k - 2, letters[0])]
    b_entries = [(k - 2, letters[k - 1])]
    return n, u_entries, d_entries, b_entries


def standard_linearization(qt: NCPolynomial, block: BlockStyle = "padded") -> SymmetrizedLinearization:
    """Standard self-adjoint linearization of 1 - qt over hermitian symbols."""
    if qt.has_general_symbols():
        raise AlphabetError("Standard construction needs hermitian symbols only; hermitize first.")
    if qt.constant_term != 0:
        raise UsageError("Polynomial must vanish at the origin (q(0) = 0).")
    if not qt.is_self_adjoint(tol=SELF_ADJOINT_TOL):
        raise NotSelfAdjointError("Standard construction needs a self-adjoint polynomial.")
    if block not in ("padded", "compact"):
        raise UsageError(f"Unknown block style {block!r}.")

    qt = qt.hermitian_part()
    gamma = qt.alpha_star
    monomials = [(word, coeff) for word, coeff in qt.items() if len(word) >= 2]
    patterns = [(_basic_block(word, block), coeff) for word, coeff in monomials]
    n_total = sum(pattern[0] for pattern, _ in patterns)
    m = 1 + 2 * n_total

    # affine[0] is the constant part, affine[g + 1] the coefficient of x_g
    affine = np.zeros((gamma + 1, m, m), dtype=complex)
    affine[0, 0, 0] = 1.0
    for g in range(gamma):
        affine[g + 1, 0, 0] = -qt.coefficient((Symbol.x(g + 1),)).real

    offset = 0
    for (n, u_entries, d_entries, b_entries), coeff in patterns:
        zeta = -coeff / 2
        radius = math.sqrt(abs(zeta))
        phase = abs(zeta) / zeta
        d_rows = 1 + offset
        b_rows = 1 + n_total + offset
        for col, letter in d_entries:
            value = radius
            affine[letter + 1, 0, d_rows + col] += value
            affine[letter + 1, d_rows + col, 0] += np.conj(value)
        for row, letter in b_entries:
            value = radius
            affine[letter + 1, b_rows + row, 0] += value
            affine[letter + 1, 0, b_rows + row] += np.conj(value)
        for row, col, letter in u_entries:
            value = phase * (-1.0 if letter < 0 else 1.0)
            slot = 0 if letter < 0 else letter + 1
            affine[slot, b_rows + row, d_rows + col] += value
            affine[slot, d_rows + col, b_rows + row] += np.conj(value)
        offset += n

    K0 = affine[0]
    K = tuple(-affine[g + 1] for g in range(gamma))
    logger.debug("Standard linearization: %d monomials, dimension %d", len(monomials), m)
    return SymmetrizedLinearization(K0, K)


# Rank-revealing spans


@dataclass
class _GreedyBasis:
    dim: int
    tol: float = RANK_TOL
    basis: np.ndarray = field(init=False)
    scale: float = 0.0
    ambiguous: list[tuple[LetterWord, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.basis = np.zeros((self.dim, 0), dtype=complex)

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    def offer(self, vector: np.ndarray, word: LetterWord) -> bool:
        norm = float(np.linalg.norm(vector))
        self.scale = max(self.scale, norm)
        if self.scale == 0.0 or self.rank >= self.dim:
            return False
        residual = vector - self.basis @ (self.basis.conj().T @ vector)
        residual = residual - self.basis @ (self.basis.conj().T @ residual)
        ratio = float(np.linalg.norm(residual)) / self.scale
        if self.tol / RANK_AMBIGUITY_FACTOR < ratio < self.tol * RANK_AMBIGUITY_FACTOR:
            self.ambiguous.append((word, ratio))
        if ratio <= self.tol:
            return False
        self.basis = np.column_stack([self.basis, residual / np.linalg.norm(residual)])
        return True


@dataclass(frozen=True)
class _SpanResult:
    words: list[LetterWord]
    vectors: list[np.ndarray]
    basis: np.ndarray
    ambiguous: list[tuple[LetterWord, float]]

    @property
    def rank(self) -> int:
        return len(self.words)


def _word_span(
    start: np.ndarray,
    maps: Sequence[np.ndarray],
    max_length: Optional[int] = None,
    project: Optional[np.ndarray] = None,
    tol: float = RANK_TOL,
) -> _SpanResult:
    """
    Greedy breadth-first basis of span{maps_w start}, words extended on the left.

    Candidates of each length are visited in lexicographic order. When
    `project` is given, independence is judged on the projected vectors while
    the raw vectors are returned.
    """
    dim = start.shape[0]
    greedy = _GreedyBasis(dim, tol)
    words: list[LetterWord] = []
    vectors: list[np.ndarray] = []

    def offer(word: LetterWord, vector: np.ndarray) -> bool:
        judged = project @ vector if project is not None else vector
        if greedy.offer(judged, word):
            words.append(word)
            vectors.append(vector)
            return True
        return False

    frontier: list[tuple[LetterWord, np.ndarray]] = []
    if offer((), start):
        frontier.append(((), start))
    length = 0
    while frontier and (max_length is None or length < max_length) and greedy.rank < dim:
        length += 1
        candidates = sorted(
            (((g,) + word, maps[g] @ vector) for word, vector in frontier for g in range(len(maps))),
            key=lambda item: item[0],
        )
        frontier = [(word, vector) for word, vector in candidates if offer(word, vector)]
    return _SpanResult(words, vectors, greedy.basis, greedy.ambiguous)


# Minimization


def minimal_linearization(lin: AnyLinearization, tol: float = RANK_TOL) -> SymmetrizedLinearization:
    """Reduce a hermitian pencil to minimal dimension via its word-indexed Hankel blocks."""
    sym = lin.symmetrized()
    K0, family = sym.K0, sym.K
    A = sym.A
    A_adj = tuple(a.conj().T for a in A)

    reachable = _word_span(sym.e1, A, tol=tol)
    if reachable.ambiguous:
        raise RankAmbiguityError(
            "Reachable span has an ambiguous numerical rank.",
            {"words": [list(w) for w, _ in reachable.ambiguous]},
        )
    P_U = reachable.basis @ reachable.basis.conj().T

    xi_root = sym.K0_inv @ sym.e1
    selection = _word_span(xi_root, A_adj, project=P_U, tol=tol)
    if selection.ambiguous:
        raise RankAmbiguityError(
            "Word selection has an ambiguous numerical rank.",
            {"words": [list(w) for w, _ in selection.ambiguous]},
        )

    Xi = np.column_stack(selection.vectors)
    hankel_0 = Xi.conj().T @ K0 @ Xi
    hankel_0 = (hankel_0 + hankel_0.conj().T) / 2
    hankels = []
    for K in family:
        block = Xi.conj().T @ K @ Xi
        hankels.append((block + block.conj().T) / 2)

    first_column = hankel_0[:, 0]
    norm = float(np.linalg.norm(first_column))
    target = first_column / norm
    target[0] = target[0].real
    W = _householder_to(target)
    scale = norm**2
    K0_min = W.conj().T @ hankel_0 @ W / scale
    K_min = tuple(W.conj().T @ H @ W / scale for H in hankels)
    logger.info("Minimal linearization: dimension %d -> %d", sym.m, K0_min.shape[0])
    return SymmetrizedLinearization(
        (K0_min + K0_min.conj().T) / 2,
        tuple((k + k.conj().T) / 2 for k in K_min),
    )


def _householder_to(target: np.ndarray) -> np.ndarray:
    """Hermitian unitary W with W e1 = target (unit vector, real first entry)."""
    n = target.shape[0]
    v = -target.astype(complex)
    v[0] += 1.0
    norm_sq = float(np.vdot(v, v).real)
    if norm_sq < 1e-30:
        return np.eye(n, dtype=complex)
    return np.eye(n, dtype=complex) - 2.0 * np.outer(v, v.conj()) / norm_sq


# Certification


def _letter_word_to_symbols(word: LetterWord) -> Word:
    return tuple(Symbol.x(g + 1) for g in word)


def series_automaton(qt: NCPolynomial) -> tuple[np.ndarray, list[np.ndarray]]:
    """Weighted automaton for sum_k qt^k; state 0 is both initial and final."""
    monomials = list(qt.items())
    n_states = 1 + sum(len(word) - 1 for word, _ in monomials)
    gamma = qt.alpha_star
    transitions = [np.zeros((n_states, n_states), dtype=complex) for _ in range(gamma)]
    next_state = 1
    for word, coeff in monomials:
        letters = [symbol.index - 1 for symbol in word]
        current = 0
        for position, letter in enumerate(letters):
            weight = coeff if position == 0 else 1.0
            if position == len(letters) - 1:
                target = 0
            else:
                target = next_state
                next_state += 1
            transitions[letter][current, target] += weight
            current = target
    root = np.zeros(n_states, dtype=complex)
    root[0] = 1.0
    return root, transitions


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_coeff_err: float
    depth: int
    exhaustive_depth: int
    words_checked: int
    certificate_words: int
    first_mismatch: Optional[str] = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "pass": self.passed,
            "maxCoeffErr": self.max_coeff_err,
            "depth": self.depth,
            "exhaustiveDepth": self.exhaustive_depth,
            "wordsChecked": self.words_checked,
            "certificateWords": self.certificate_words,
            "firstMismatch": self.first_mismatch,
        }


def realization_coefficient(lin: AnyLinearization, word: Iterable[int]) -> complex:
    """<K0^-1 e1, A_w e1> for a word of 0-based hermitian letters."""
    sym = lin.symmetrized()
    vector = sym.e1
    for letter in reversed(tuple(word)):
        vector = sym.A[letter] @ vector
    return complex(sym.K0_inv[0, :] @ vector)


def verify_linearization(
    lin: AnyLinearization,
    q: NCPolynomial,
    depth: Optional[int] = None,
    tol: float = VERIFY_TOL,
) -> VerificationReport:
    """
    Compare realization and series coefficients of (1 - hermitize(q))^-1.

    Words up to `depth` (default 2m) are compared exhaustively while the word
    count stays within budget; a reachable-span certificate on the difference
    realization then covers words of every length.
    """
    sym = lin.symmetrized()
    qt = hermitize(q)
    gamma = sym.gamma_star
    if qt.alpha_star != gamma:
        raise AlphabetError(
            f"Pencil has {gamma} hermitian symbols but the polynomial needs {qt.alpha_star}."
        )
    depth = 2 * sym.m if depth is None else depth

    exhaustive_depth = 0
    total_words = 1
    while exhaustive_depth < depth and gamma > 0:
        next_count = gamma ** (exhaustive_depth + 1)
        if total_words + next_count > EXHAUSTIVE_WORD_BUDGET:
            break
        total_words += next_count
        exhaustive_depth += 1

    series = inverse_series(qt, exhaustive_depth)
    dense_series = [np.zeros(gamma**level if gamma else 1, dtype=complex) for level in range(exhaustive_depth + 1)]
    for word, coeff in series.coefficients.items():
        index = 0
        for symbol in word:
            index = index * gamma + (symbol.index - 1)
        dense_series[len(word)][index] = coeff

    row = sym.K0_inv[0, :]
    level_vectors = sym.e1[None, :]
    max_err = 0.0
    first_mismatch: Optional[str] = None
    for level in range(exhaustive_depth + 1):
        if level > 0:
            level_vectors = np.concatenate([level_vectors @ A.T for A in sym.A], axis=0)
        errors = np.abs(level_vectors @ row - dense_series[level])
        if errors.size:
            max_err = max(max_err, float(errors.max()))
            if first_mismatch is None and errors.max() > tol:
                index = int(np.argmax(errors > tol))
                first_mismatch = _format_letter_word(_index_to_word(index, level, gamma))

    root, transitions = series_automaton(qt)
    joint_start = np.concatenate([sym.e1, root])
    joint_row = np.concatenate([row, -root])
    joint_maps = [sla.block_diag(A, T) for A, T in zip(sym.A, transitions)]
    certificate = _word_span(joint_start, joint_maps)
    for word, vector in zip(certificate.words, certificate.vectors):
        err = abs(complex(joint_row @ vector))
        if err > max_err:
            max_err = err
        if first_mismatch is None and err > tol:
            first_mismatch = _format_letter_word(word)

    passed = max_err <= tol
    if not passed:
        logger.warning("Linearization check failed: max coefficient error %.3e", max_err)
    return VerificationReport(
        passed=passed,
        max_coeff_err=max_err,
        depth=depth,
        exhaustive_depth=exhaustive_depth,
        words_checked=total_words,
        certificate_words=certificate.rank,
        first_mismatch=first_mismatch,
    )


def _index_to_word(index: int, length: int, gamma: int) -> LetterWord:
    letters: list[int] = []
    for _ in range(length):
        index, letter = divmod(index, gamma)
        letters.append(letter)
    return tuple(reversed(letters))


def _format_letter_word(word: LetterWord) -> str:
    if not word:
        return "1"
    return "*".join(f"x{g + 1}" for g in word)


@dataclass(frozen=True)
class NilpotencyReport:
    invertible: bool
    normalized: bool
    index: Optional[int]
    chain_dims: list[int]

    @property
    def conditions_i_ii(self) -> tuple[bool, bool]:
        return (self.invertible, self.normalized)

    @property
    def nilpotent(self) -> bool:
        return self.invertible and self.normalized and self.index is not None

    def as_dict(self) -> dict[str, Any]:
        return {
            "invertible": self.invertible,
            "normalized": self.normalized,
            "index": self.index,
            "chainDims": self.chain_dims,
            "nilpotent": self.nilpotent,
        }


def check_nilpotency(lin: AnyLinearization, tol: float = RANK_TOL) -> NilpotencyReport:
    """Invertibility, normalization and joint nilpotency of {pi' A_g pi'}."""
    sym = lin.symmetrized()
    singular_values = sla.svdvals(sym.K0)
    invertible = bool(singular_values.min() > INVERTIBILITY_TOL * singular_values.max())
    if not invertible:
        return NilpotencyReport(False, False, None, [sym.m])
    normalized = bool(abs(sym.K0_inv[0, 0] - 1.0) <= NORMALIZATION_TOL)

    compressed = [sym.pi_prime @ A @ sym.pi_prime for A in sym.A]
    scale = max([1.0] + [float(np.linalg.norm(B, 2)) for B in compressed])
    basis = np.eye(sym.m, dtype=complex)
    dims = [sym.m]
    index: Optional[int] = None
    for step in range(1, sym.m + 1):
        if not compressed:
            rank = 0
        else:
            images = np.concatenate([B @ basis for B in compressed], axis=1)
            U, s, _ = np.linalg.svd(images, full_matrices=False)
            rank = int(np.sum(s > tol * scale))
            basis = U[:, :rank]
        dims.append(rank)
        if rank == 0:
            index = step
            break
        if rank == dims[-2]:
            break
    return NilpotencyReport(invertible, normalized, index, dims)


@dataclass(frozen=True)
class MinimalityReport:
    m: int
    reachable_rank: int
    observable_rank: int
    ambiguous: bool

    @property
    def minimal(self) -> bool:
        return self.reachable_rank == self.m and self.observable_rank == self.m

    def as_dict(self) -> dict[str, Any]:
        return {
            "m": self.m,
            "reachableRank": self.reachable_rank,
            "observableRank": self.observable_rank,
            "rankAmbiguous": self.ambiguous,
            "minimal": self.minimal,
        }


def _svd_rank(vectors: list[np.ndarray], tol: float) -> int:
    if not vectors:
        return 0
    singular_values = sla.svdvals(np.column_stack(vectors))
    return int(np.sum(singular_values > tol * singular_values.max()))


def minimality_report(lin: AnyLinearization, tol: float = RANK_TOL) -> MinimalityReport:
    sym = lin.symmetrized()
    max_length = max(sym.m - 1, 0)
    reachable = _word_span(sym.e1, sym.A, max_length=max_length, tol=tol)
    observable = _word_span(
        sym.K0_inv @ sym.e1,
        tuple(A.conj().T for A in sym.A),
        max_length=max_length,
        tol=tol,
    )
    ambiguous = bool(reachable.ambiguous or observable.ambiguous)
    if ambiguous:
        logger.warning("Minimality check: rank is ambiguous near threshold %.1e", tol)
    return MinimalityReport(
        m=sym.m,
        reachable_rank=_svd_rank(reachable.vectors, tol),
        observable_rank=_svd_rank(observable.vectors, tol),
        ambiguous=ambiguous,
    )


def check_minimality(lin: AnyLinearization, tol: float = RANK_TOL) -> bool:
    return minimality_report(lin, tol).minimal


# Worked-model pencils


def quadratic_form_pencil(Xi: np.ndarray) -> SymmetrizedLinearization:
    """Pencil diag(1, Xi^-1) - sum_g (e1 e_{g+1}^t + e_{g+1} e1^t) x_g for q = x^t Xi x."""
    Xi = np.asarray(Xi, dtype=complex)
    gamma = Xi.shape[0]
    if sla.svdvals(Xi).min() <= INVERTIBILITY_TOL * max(1.0, np.abs(Xi).max()):
        raise UsageError("Quadratic form matrix must be invertible.")
    m = gamma + 1
    K0 = np.zeros((m, m), dtype=complex)
    K0[0, 0] = 1.0
    K0[1:, 1:] = np.linalg.inv(Xi)
    K = []
    for g in range(gamma):
        Kg = np.zeros((m, m), dtype=complex)
        Kg[0, g + 1] = Kg[g + 1, 0] = 1.0
        K.append(Kg)
    return SymmetrizedLinearization((K0 + K0.conj().T) / 2, tuple(K))


def quadratic_form_polynomial(Xi: np.ndarray) -> NCPolynomial:
    Xi = np.asarray(Xi, dtype=complex)
    gamma = Xi.shape[0]
    terms = {
        (Symbol.x(i + 1), Symbol.x(j + 1)): Xi[i, j]
        for i in range(gamma)
        for j in range(gamma)
        if Xi[i, j] != 0
    }
    return NCPolynomial(terms, gamma, 0)


def product_pencil(beta_star: int) -> Linearization:
    """Minimal pencil of dimension 2 beta* for y_1...y_b y_b^*...y_1^*."""
    if beta_star < 1:
        raise UsageError("Product model needs beta* >= 1.")
    m = 2 * beta_star
    K0 = np.zeros((m, m), dtype=complex)
    K0[0, 0] = 1.0
    for j in range(2, m + 1):
        K0[j - 1, m + 2 - j - 1] = 1.0
    L = []
    for b in range(1, beta_star + 1):
        Lb = np.zeros((m, m), dtype=complex)
        Lb[b - 1, m + 1 - b - 1] = 1.0
        L.append(Lb)
    return Linearization(K0, (), tuple(L))


def product_polynomial(beta_star: int) -> NCPolynomial:
    word = tuple(Symbol.y(b) for b in range(1, beta_star + 1)) + tuple(
        Symbol.y_adjoint(b) for b in range(beta_star, 0, -1)
    )
    return NCPolynomial({word: 1.0}, 0, beta_star)


# Dimension table


@dataclass(frozen=True)
class DimensionRow:
    degree: int
    standard_dim: float
    minimal_dim: float
    samples: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "degree": self.degree,
            "standardDim": self.standard_dim,
            "minimalDim": self.minimal_dim,
            "samples": self.samples,
        }


def generic_self_adjoint_polynomial(
    rng: np.random.Generator,
    gamma: int,
    degree: int,
) -> NCPolynomial:
    """Random self-adjoint polynomial containing every word of length 1..degree."""
    terms: dict[Word, complex] = {}
    for length in range(1, degree + 1):
        for index in range(gamma**length):
            word = _letter_word_to_symbols(_index_to_word(index, length, gamma))
            if word in terms:
                continue
            mirror = tuple(reversed(word))
            if mirror == word:
                terms[word] = rng.normal()
            else:
                coeff = complex(rng.normal(), rng.normal())
                terms[word] = coeff
                terms[mirror] = coeff.conjugate()
    return NCPolynomial(terms, gamma, 0)


def dimension_table(
    max_degree: int,
    samples: int = 3,
    seed: int = 0,
    gamma: int = 2,
    block: BlockStyle = "compact",
) -> list[DimensionRow]:
    """Average standard and minimal dimensions for generic polynomials by degree."""
    rng = np.random.default_rng(seed)
    rows: list[DimensionRow] = []
    for degree in range(1, max_degree + 1):
        standard_dims: list[int] = []
        minimal_dims: list[int] = []
        for _ in range(samples):
            qt = generic_self_adjoint_polynomial(rng, gamma, degree)
            standard = standard_linearization(qt, block=block)
            standard_dims.append(standard.m)
            minimal_dims.append(minimal_linearization(standard).m)
        rows.append(
            DimensionRow(
                degree=degree,
                standard_dim=float(np.mean(standard_dims)),
                minimal_dim=float(np.mean(minimal_dims)),
                samples=samples,
            )
        )
        logger.info("Degree %d: standard %.1f, minimal %.1f", degree, rows[-1].standard_dim, rows[-1].minimal_dim)
    return rows


# Serialization


def _matrix_to_pairs(matrix: np.ndarray) -> list[list[list[float]]]:
    return [[[float(v.real), float(v.imag)] for v in row] for row in matrix]


def _pairs_to_matrix(rows: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def linearization_to_dict(lin: AnyLinearization) -> dict[str, Any]:
    pencil = as_linearization(lin)
    return {
        "m": pencil.m,
        "alpha_star": pencil.alpha_star,
        "beta_star": pencil.beta_star,
        "K0": _matrix_to_pairs(pencil.K0),
        "K": [_matrix_to_pairs(K) for K in pencil.K],
        "L": [_matrix_to_pairs(L) for L in pencil.L],
    }


def linearization_from_dict(data: Mapping[str, Any]) -> Linearization:
    from lib.validation import LinearizationDocument

    document = LinearizationDocument.model_validate(data)
    return Linearization(
        _pairs_to_matrix(document.K0),
        tuple(_pairs_to_matrix(K) for K in document.K),
        tuple(_pairs_to_matrix(L) for L in document.L),
    )
