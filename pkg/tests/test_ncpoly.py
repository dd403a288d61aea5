from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np
import pytest

from lib.errors import AlphabetError, EvaluationError, NotSelfAdjointError, PolynomialSyntaxError, UsageError
from lib.ncpoly import (
    NCPolynomial,
    Symbol,
    evaluate,
    format_poly,
    hermitize,
    inverse_series,
    parse_poly,
    shift_to_q,
)
from tests.helpers import random_polynomial, random_self_adjoint_q, random_wigner

X1, X2 = Symbol.x(1), Symbol.x(2)
Y1 = Symbol.y(1)


def test_parse_anticommutator_is_canonical_and_self_adjoint() -> None:
    p = parse_poly("x1*x2 + x2*x1", 2, 0)

    assert p.coefficient((X1, X2)) == 1
    assert p.coefficient((X2, X1)) == 1
    assert p.degree == 2
    assert len(p) == 2
    assert p.is_self_adjoint()


def test_parse_collects_like_terms_and_powers() -> None:
    p = parse_poly("x1^2 - x1*x1 + 3*x2 - (x2)", 2, 0)

    assert p == parse_poly("2*x2", 2, 0)


def test_parse_imaginary_coefficients_and_adjoint() -> None:
    p = parse_poly("2i*x1*x2", 2, 0)

    assert p.coefficient((X1, X2)) == 2j
    assert p.adjoint().coefficient((X2, X1)) == -2j
    assert not p.is_self_adjoint()
    assert (p + p.adjoint()).is_self_adjoint()


def test_parse_general_symbol_adjoints() -> None:
    p = parse_poly("y1*y1'", 0, 1)

    assert p.is_self_adjoint()
    assert p.has_general_symbols()
    assert not parse_poly("y1", 0, 1).is_self_adjoint()
    assert parse_poly("(y1*y1)'", 0, 1) == parse_poly("y1'*y1'", 0, 1)


def test_syntax_error_reports_byte_offset() -> None:
    with pytest.raises(PolynomialSyntaxError, match="offset 5") as excinfo:
        parse_poly("x1 + * x2", 2, 0)

    assert excinfo.value.offset == 5
    assert excinfo.value.exit_code == 1


def test_variable_outside_alphabet_is_rejected() -> None:
    with pytest.raises(AlphabetError, match="x3"):
        parse_poly("x1 + x3", 2, 0)


def test_format_reads_back_exactly() -> None:
    rng = np.random.default_rng(7)
    q = random_self_adjoint_q(rng, 2, 1, degree=3, terms=4)

    assert parse_poly(format_poly(q), 2, 1) == q


def test_shift_to_q_splits_constant() -> None:
    offset, q = shift_to_q(parse_poly("3 + x1", 1, 0))

    assert offset == 3.0
    assert q.constant_term == 0
    assert q.coefficient((X1,)) == -1


def test_shift_to_q_rejects_non_self_adjoint() -> None:
    with pytest.raises(NotSelfAdjointError):
        shift_to_q(parse_poly("x1*x2", 2, 0))


def test_hermitize_replaces_general_symbols() -> None:
    qt = hermitize(parse_poly("y1*y1'", 0, 1))

    assert qt.alpha_star == 2
    assert not qt.has_general_symbols()
    assert qt.coefficient((X1, X1)) == pytest.approx(0.5)
    assert qt.coefficient((X2, X2)) == pytest.approx(0.5)
    assert qt.coefficient((X1, X2)) == pytest.approx(-0.5j)
    assert qt.coefficient((X2, X1)) == pytest.approx(0.5j)
    assert qt.is_self_adjoint(tol=1e-12)


def test_hermitize_requires_vanishing_constant() -> None:
    with pytest.raises(UsageError, match="q\\(0\\) = 0"):
        hermitize(parse_poly("1 + x1", 1, 0))


def test_inverse_series_counts_words() -> None:
    series = inverse_series(parse_poly("x1 + x2", 2, 0), 3)

    assert series.coefficient(()) == 1
    assert series.coefficient((X1, X2, X1)) == 1
    with pytest.raises(UsageError):
        series.coefficient((X1, X1, X1, X1))


def test_evaluate_matches_matrix_products() -> None:
    rng = np.random.default_rng(0)
    A, B = random_wigner(rng, 6), random_wigner(rng, 6)
    C = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))

    anticommutator = evaluate(parse_poly("x1*x2 + x2*x1", 2, 0), {X1: A, X2: B})
    product = evaluate(parse_poly("2 + y1*y1'", 0, 1), {Y1: C})

    np.testing.assert_allclose(anticommutator, A @ B + B @ A, atol=1e-12)
    np.testing.assert_allclose(product, 2 * np.eye(6) + C @ C.conj().T, atol=1e-12)


def test_evaluate_reports_missing_and_mis_sized_matrices() -> None:
    p = parse_poly("x1*x2", 2, 0)

    with pytest.raises(EvaluationError, match="x2"):
        evaluate(p, {X1: np.eye(3)})
    with pytest.raises(EvaluationError, match="size"):
        evaluate(p, {X1: np.eye(3), X2: np.eye(4)})


def test_negative_power_is_rejected() -> None:
    with pytest.raises(UsageError):
        NCPolynomial.monomial((X1,)) ** -1


def _max_coefficient(p: NCPolynomial) -> float:
    return max((abs(c) for _, c in p.items()), default=0.0)


@pytest.mark.parametrize("seed", range(4))
def test_adjoint_reverses_products(seed: int) -> None:
    rng = np.random.default_rng(seed)
    p = random_polynomial(rng, 2, 1, degree=3, terms=4)
    r = random_polynomial(rng, 2, 1, degree=3, terms=4)

    assert _max_coefficient((p * r).adjoint() - r.adjoint() * p.adjoint()) <= 1e-12
    assert _max_coefficient(p.adjoint().adjoint() - p) == 0.0

    Y = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / 2
    assignment = {X1: random_wigner(rng, 4), X2: random_wigner(rng, 4), Y1: Y}
    np.testing.assert_allclose(evaluate(p.adjoint(), assignment), evaluate(p, assignment).conj().T, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_hermitize_preserves_evaluation(seed: int) -> None:
    rng = np.random.default_rng(100 + seed)
    q = random_polynomial(rng, 1, 1, degree=3, terms=5)
    X = random_wigner(rng, 4)
    real_part, imag_part = random_wigner(rng, 4), random_wigner(rng, 4)
    Y = (real_part + 1j * imag_part) / np.sqrt(2)

    direct = evaluate(q, {X1: X, Y1: Y})
    hermitian = evaluate(hermitize(q), {X1: X, X2: real_part, Symbol.x(3): imag_part})

    np.testing.assert_allclose(hermitian, direct, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_inverse_series_matches_word_factorizations(seed: int) -> None:
    rng = np.random.default_rng(200 + seed)
    q = random_polynomial(rng, 2, 0, degree=3, terms=5)
    order = 4
    series = inverse_series(q, order)

    for length in range(order + 1):
        for word in product((X1, X2), repeat=length):

            @lru_cache(maxsize=None)
            def split(start: int) -> complex:
                if start == len(word):
                    return 1.0
                return sum(q.coefficient(word[start:stop]) * split(stop) for stop in range(start + 1, len(word) + 1))

            assert series.coefficient(word) == pytest.approx(split(0), abs=1e-12)
