"""
NC Polynomials - Toolkit Module
Noncommutative polynomials in hermitian symbols x_a and general symbols y_b.

Words are tuples of Symbol values; a polynomial is a canonical map from
words to complex coefficients, ordered by degree and then lexicographically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import IntEnum
from functools import reduce
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Union

import numpy as np

from lib.errors import (
    AlphabetError,
    EvaluationError,
    NotSelfAdjointError,
    PolynomialSyntaxError,
    UsageError,
)

INV_SQRT2 = math.sqrt(0.5)

Scalar = Union[int, float, complex]


class SymbolKind(IntEnum):
    HERMITIAN_X = 0
    GENERAL_Y = 1
    ADJOINT_Y = 2


@dataclass(frozen=True, order=True)
class Symbol:
    """One letter of the alphabet: x_a, y_b or y_b*."""

    kind: SymbolKind
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise AlphabetError("Variable indices start at 1.")

    @classmethod
    def x(cls, index: int) -> "Symbol":
        return cls(SymbolKind.HERMITIAN_X, index)

    @classmethod
    def y(cls, index: int) -> "Symbol":
        return cls(SymbolKind.GENERAL_Y, index)

    @classmethod
    def y_adjoint(cls, index: int) -> "Symbol":
        return cls(SymbolKind.ADJOINT_Y, index)

    def involution(self) -> "Symbol":
        if self.kind == SymbolKind.GENERAL_Y:
            return Symbol(SymbolKind.ADJOINT_Y, self.index)
        if self.kind == SymbolKind.ADJOINT_Y:
            return Symbol(SymbolKind.GENERAL_Y, self.index)
        return self

    def __str__(self) -> str:
        if self.kind == SymbolKind.HERMITIAN_X:
            return f"x{self.index}"
        if self.kind == SymbolKind.GENERAL_Y:
            return f"y{self.index}"
        return f"y{self.index}'"


Word = tuple[Symbol, ...]


def word_key(word: Word) -> tuple[int, Word]:
    return (len(word), word)


def format_word(word: Word) -> str:
    return "*".join(str(symbol) for symbol in word)


class NCPolynomial:
    """Immutable noncommutative polynomial with complex coefficients."""

    __slots__ = ("_terms", "alpha_star", "beta_star")

    def __init__(
        self,
        terms: Optional[Mapping[Word, Scalar]] = None,
        alpha_star: int = 0,
        beta_star: int = 0,
    ) -> None:
        if alpha_star < 0 or beta_star < 0:
            raise AlphabetError("Alphabet sizes must be non-negative.")

        collected: dict[Word, complex] = {}
        for raw_word, raw_coeff in (terms or {}).items():
            word = tuple(raw_word)
            coeff = complex(raw_coeff)
            if coeff == 0:
                continue
            for symbol in word:
                limit = alpha_star if symbol.kind == SymbolKind.HERMITIAN_X else beta_star
                if symbol.index > limit:
                    raise AlphabetError(
                        f"Symbol {symbol} is outside the declared alphabet "
                        f"(alpha*={alpha_star}, beta*={beta_star})."
                    )
            collected[word] = collected.get(word, 0j) + coeff

        self._terms = {
            word: collected[word]
            for word in sorted(collected, key=word_key)
            if collected[word] != 0
        }
        self.alpha_star = alpha_star
        self.beta_star = beta_star

    # Constructors

    @classmethod
    def constant(cls, value: Scalar, alpha_star: int = 0, beta_star: int = 0) -> "NCPolynomial":
        return cls({(): value}, alpha_star, beta_star)

    @classmethod
    def monomial(
        cls,
        word: Iterable[Symbol],
        coeff: Scalar = 1.0,
        alpha_star: Optional[int] = None,
        beta_star: Optional[int] = None,
    ) -> "NCPolynomial":
        word = tuple(word)
        if alpha_star is None:
            alpha_star = max((s.index for s in word if s.kind == SymbolKind.HERMITIAN_X), default=0)
        if beta_star is None:
            beta_star = max((s.index for s in word if s.kind != SymbolKind.HERMITIAN_X), default=0)
        return cls({word: coeff}, alpha_star, beta_star)

    # Accessors

    @property
    def terms(self) -> Mapping[Word, complex]:
        return MappingProxyType(self._terms)

    def items(self) -> Iterator[tuple[Word, complex]]:
        return iter(self._terms.items())

    def coefficient(self, word: Iterable[Symbol]) -> complex:
        return self._terms.get(tuple(word), 0j)

    @property
    def constant_term(self) -> complex:
        return self._terms.get((), 0j)

    @property
    def degree(self) -> int:
        return max((len(word) for word in self._terms), default=0)

    @property
    def gamma_star(self) -> int:
        return self.alpha_star + 2 * self.beta_star

    def is_zero(self) -> bool:
        return not self._terms

    def has_general_symbols(self) -> bool:
        return any(
            symbol.kind != SymbolKind.HERMITIAN_X for word in self._terms for symbol in word
        )

    def homogeneous_part(self, degree: int) -> "NCPolynomial":
        return NCPolynomial(
            {word: c for word, c in self._terms.items() if len(word) == degree},
            self.alpha_star,
            self.beta_star,
        )

    def coefficient_scale(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # Algebra

    def _alphabet(self, other: "NCPolynomial") -> tuple[int, int]:
        return max(self.alpha_star, other.alpha_star), max(self.beta_star, other.beta_star)

    def _coerce(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        if isinstance(other, NCPolynomial):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return NCPolynomial.constant(complex(other), self.alpha_star, self.beta_star)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        merged = dict(self._terms)
        for word, coeff in other._terms.items():
            merged[word] = merged.get(word, 0j) + coeff
        return NCPolynomial(merged, *self._alphabet(other))

    __radd__ = __add__

    def __neg__(self) -> "NCPolynomial":
        return self.scale(-1.0)

    def __sub__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "NCPolynomial":
        return (-self) + other

    def scale(self, factor: Scalar) -> "NCPolynomial":
        factor = complex(factor)
        return NCPolynomial(
            {word: factor * coeff for word, coeff in self._terms.items()},
            self.alpha_star,
            self.beta_star,
        )

    def multiply(self, other: "NCPolynomial", max_degree: Optional[int] = None) -> "NCPolynomial":
        """Product self*other, optionally dropping words longer than max_degree."""
        product: dict[Word, complex] = {}
        for left, a in self._terms.items():
            for right, b in other._terms.items():
                if max_degree is not None and len(left) + len(right) > max_degree:
                    continue
                word = left + right
                product[word] = product.get(word, 0j) + a * b
        return NCPolynomial(product, *self._alphabet(other))

    def __mul__(self, other: Union["NCPolynomial", Scalar]) -> "NCPolynomial":
        if isinstance(other, NCPolynomial):
            return self.multiply(other)
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other: Scalar) -> "NCPolynomial":
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, exponent: int) -> "NCPolynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise UsageError("Polynomial powers must be non-negative integers.")
        result = NCPolynomial.constant(1.0, self.alpha_star, self.beta_star)
        for _ in range(exponent):
            result = result * self
        return result

    def adjoint(self) -> "NCPolynomial":
        return NCPolynomial(
            {
                tuple(symbol.involution() for symbol in reversed(word)): coeff.conjugate()
                for word, coeff in self._terms.items()
            },
            self.alpha_star,
            self.beta_star,
        )

    def is_self_adjoint(self, tol: float = 0.0) -> bool:
        difference = self - self.adjoint()
        if tol == 0.0:
            return difference.is_zero()
        return difference.coefficient_scale() <= tol * max(1.0, self.coefficient_scale())

    def hermitian_part(self) -> "NCPolynomial":
        return (self + self.adjoint()).scale(0.5)

    def substitute(
        self,
        mapping: Mapping[Symbol, "NCPolynomial"],
        alpha_star: int,
        beta_star: int,
    ) -> "NCPolynomial":
        """Replace symbols by polynomials; unmapped symbols are kept."""
        result: dict[Word, complex] = {}
        for word, coeff in self._terms.items():
            partial = NCPolynomial.constant(coeff, alpha_star, beta_star)
            for symbol in word:
                image = mapping.get(symbol)
                if image is None:
                    image = NCPolynomial({(symbol,): 1.0}, alpha_star, beta_star)
                partial = partial * image
            for sub_word, sub_coeff in partial.items():
                result[sub_word] = result.get(sub_word, 0j) + sub_coeff
        return NCPolynomial(result, alpha_star, beta_star)

    # Comparison and display

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NCPolynomial):
            return NotImplemented
        return (
            self._terms == other._terms
            and self.alpha_star == other.alpha_star
            and self.beta_star == other.beta_star
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self._terms)

    def format(self) -> str:
        return format_poly(self)

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"NCPolynomial({format_poly(self)!r}, alpha_star={self.alpha_star}, beta_star={self.beta_star})"


def _format_coefficient(coeff: complex) -> str:
    if coeff.imag == 0:
        return repr(coeff.real)
    sign = "-" if math.copysign(1.0, coeff.imag) < 0 else "+"
    return f"({coeff.real!r}{sign}{abs(coeff.imag)!r}i)"


def _format_term(word: Word, coeff: complex) -> str:
    if not word:
        return _format_coefficient(coeff)
    body = format_word(word)
    if coeff == 1:
        return body
    if coeff == -1:
        return f"-{body}"
    return f"{_format_coefficient(coeff)}*{body}"


def format_poly(p: NCPolynomial) -> str:
    """Render p in the input grammar; parse_poly reads it back exactly."""
    if p.is_zero():
        return "0"
    pieces: list[str] = []
    for word, coeff in p.items():
        text = _format_term(word, coeff)
        if not pieces:
            pieces.append(text)
        elif text.startswith("-"):
            pieces.append(f" - {text[1:]}")
        else:
            pieces.append(f" + {text}")
    return "".join(pieces)


# Parsing

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?
  | (?P<var>[xy])(?P<index>\d+)
  | (?P<unit>i)
  | (?P<op>[-+*^()'])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int
    value: object = None


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    position = 0
    while position < len(text):
        match = _TOKEN_PATTERN.match(text, position)
        if match is None:
            raise PolynomialSyntaxError(
                f"Unexpected character {text[position]!r}",
                len(text[:position].encode("utf-8")),
            )
        offset = len(text[:position].encode("utf-8"))
        if match.group("number") is not None:
            number_text = match.group("number")
            if match.group("imag"):
                tokens.append(_Token("number", match.group(0), offset, complex(0.0, float(number_text))))
            else:
                tokens.append(_Token("number", number_text, offset, float(number_text)))
        elif match.group("var") is not None:
            tokens.append(_Token("var", match.group(0), offset, (match.group("var"), int(match.group("index")))))
        elif match.group("unit") is not None:
            tokens.append(_Token("number", "i", offset, 1j))
        elif match.group("op") is not None:
            tokens.append(_Token("op", match.group("op"), offset))
        position = match.end()
    tokens.append(_Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text: str, alpha_star: int, beta_star: int) -> None:
        self.tokens = _tokenize(text)
        self.position = 0
        self.alpha_star = alpha_star
        self.beta_star = beta_star

    def peek(self) -> _Token:
        return self.tokens[self.position]

    def advance(self) -> _Token:
        token = self.tokens[self.position]
        self.position += 1
        return token

    def at_op(self, *symbols: str) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text in symbols

    def expect_op(self, symbol: str) -> None:
        token = self.peek()
        if not (token.kind == "op" and token.text == symbol):
            raise PolynomialSyntaxError(f"Expected {symbol!r}", token.offset)
        self.advance()

    def parse(self) -> NCPolynomial:
        result = self.parse_poly()
        token = self.peek()
        if token.kind != "end":
            raise PolynomialSyntaxError(f"Unexpected token {token.text!r}", token.offset)
        return result

    def parse_poly(self) -> NCPolynomial:
        negate = False
        if self.at_op("+", "-"):
            negate = self.advance().text == "-"
        result = self.parse_term()
        if negate:
            result = -result
        while self.at_op("+", "-"):
            operator = self.advance().text
            term = self.parse_term()
            result = result + term if operator == "+" else result - term
        return result

    def parse_term(self) -> NCPolynomial:
        result = self.parse_factor()
        while self.at_op("*"):
            self.advance()
            result = result * self.parse_factor()
        return result

    def parse_factor(self) -> NCPolynomial:
        base = self.parse_base()
        while self.at_op("'"):
            self.advance()
            base = base.adjoint()
        if self.at_op("^"):
            self.advance()
            token = self.advance()
            if token.kind != "number" or not token.text.isdigit():
                raise PolynomialSyntaxError("Expected a non-negative integer exponent", token.offset)
            base = base ** int(token.text)
        return base

    def parse_base(self) -> NCPolynomial:
        token = self.advance()
        if token.kind == "number":
            return NCPolynomial.constant(token.value, self.alpha_star, self.beta_star)  # type: ignore[arg-type]
        if token.kind == "var":
            letter, index = token.value  # type: ignore[misc]
            if index < 1:
                raise AlphabetError(f"Variable {token.text} at offset {token.offset}: indices start at 1.")
            limit = self.alpha_star if letter == "x" else self.beta_star
            if index > limit:
                raise AlphabetError(
                    f"Variable {token.text} at offset {token.offset} exceeds the declared "
                    f"alphabet size {limit}."
                )
            if letter == "x":
                symbol = Symbol.x(index)
                if self.at_op("'"):
                    self.advance()
            else:
                symbol = Symbol.y(index)
                if self.at_op("'"):
                    self.advance()
                    symbol = symbol.involution()
            return NCPolynomial({(symbol,): 1.0}, self.alpha_star, self.beta_star)
        if token.kind == "op" and token.text == "(":
            inner = self.parse_poly()
            self.expect_op(")")
            return inner
        if token.kind == "end":
            raise PolynomialSyntaxError("Unexpected end of input", token.offset)
        raise PolynomialSyntaxError(f"Unexpected token {token.text!r}", token.offset)


def parse_poly(text: str, alpha_star: int, beta_star: int) -> NCPolynomial:
    """Parse polynomial text into canonical form."""
    return _Parser(text, alpha_star, beta_star).parse()


def adjoint(p: NCPolynomial) -> NCPolynomial:
    return p.adjoint()


def shift_to_q(p: NCPolynomial) -> tuple[float, NCPolynomial]:
    """
    Split a self-adjoint p into its constant c and q with 1 - q = p - c + 1.

    Spectral quantities of p at energy E correspond to those of 1 - q at
    E - c + 1.
    """
    if not p.is_self_adjoint():
        raise NotSelfAdjointError("Polynomial must be self-adjoint.")
    constant = p.constant_term
    if constant.imag != 0:
        raise NotSelfAdjointError("Constant term must be real.")
    offset = constant.real
    q = NCPolynomial.constant(offset, p.alpha_star, p.beta_star) - p
    return offset, q


def _require_no_constant(q: NCPolynomial) -> None:
    if q.constant_term != 0:
        raise UsageError("Polynomial must vanish at the origin (q(0) = 0).")


def hermitize(q: NCPolynomial) -> NCPolynomial:
    """Rewrite q over alpha* + 2 beta* hermitian symbols."""
    _require_no_constant(q)
    alpha, beta = q.alpha_star, q.beta_star
    gamma = alpha + 2 * beta
    mapping: dict[Symbol, NCPolynomial] = {}
    for b in range(1, beta + 1):
        real_part = Symbol.x(alpha + b)
        imag_part = Symbol.x(alpha + beta + b)
        mapping[Symbol.y(b)] = NCPolynomial(
            {(real_part,): INV_SQRT2, (imag_part,): 1j * INV_SQRT2}, gamma, 0
        )
        mapping[Symbol.y_adjoint(b)] = NCPolynomial(
            {(real_part,): INV_SQRT2, (imag_part,): -1j * INV_SQRT2}, gamma, 0
        )
    return q.substitute(mapping, gamma, 0)


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients of (1 - q)^-1 for every word of length <= order; absent words are 0."""

    order: int
    coefficients: Mapping[Word, complex]

    def coefficient(self, word: Iterable[Symbol]) -> complex:
        word = tuple(word)
        if len(word) > self.order:
            raise UsageError(f"Word of length {len(word)} exceeds series order {self.order}.")
        return self.coefficients.get(word, 0j)


def inverse_series(q: NCPolynomial, order: int) -> SeriesCoefficients:
    """Truncated coefficients of sum_k q^k."""
    _require_no_constant(q)
    if order < 0:
        raise UsageError("Series order must be non-negative.")

    total: dict[Word, complex] = {(): 1.0 + 0j}
    power = NCPolynomial.constant(1.0, q.alpha_star, q.beta_star)
    for _ in range(order):
        power = power.multiply(q, max_degree=order)
        if power.is_zero():
            break
        for word, coeff in power.items():
            total[word] = total.get(word, 0j) + coeff
    return SeriesCoefficients(
        order=order,
        coefficients=MappingProxyType({w: c for w, c in total.items() if c != 0}),
    )


def evaluate(
    p: NCPolynomial,
    assignment: Mapping[Symbol, np.ndarray],
    size: Optional[int] = None,
) -> np.ndarray:
    """Evaluate p on square matrices; adjoint symbols use conjugate transposes."""
    matrices: dict[Symbol, np.ndarray] = {}
    for symbol, value in assignment.items():
        if symbol.kind == SymbolKind.ADJOINT_Y:
            raise EvaluationError(f"Assign {symbol.involution()} instead of its adjoint {symbol}.")
        array = np.asarray(value)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise EvaluationError(f"Value for {symbol} must be a square matrix.")
        if size is None:
            size = array.shape[0]
        elif array.shape[0] != size:
            raise EvaluationError(
                f"Value for {symbol} has size {array.shape[0]}, expected {size}."
            )
        matrices[symbol] = array
        if symbol.kind == SymbolKind.GENERAL_Y:
            matrices[symbol.involution()] = array.conj().T

    if size is None:
        raise EvaluationError("Matrix size is unknown: provide assignments or size.")

    result = np.zeros((size, size), dtype=complex)
    for word, coeff in p.items():
        if not word:
            result += coeff * np.eye(size)
            continue
        missing = [str(symbol) for symbol in word if symbol not in matrices]
        if missing:
            raise EvaluationError(f"Missing matrix for symbol(s): {', '.join(sorted(set(missing)))}.")
        factors = [matrices[symbol] for symbol in word]
        result += coeff * reduce(np.matmul, factors)
    return result
