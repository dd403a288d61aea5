from __future__ import annotations

import numpy as np

from lib.ncpoly import NCPolynomial, Symbol, Word


def random_polynomial(
    rng: np.random.Generator,
    alpha_star: int,
    beta_star: int,
    degree: int,
    terms: int = 3,
) -> NCPolynomial:
    """Random polynomial without constant term, complex coefficients on random monomials."""
    letters = [Symbol.x(a) for a in range(1, alpha_star + 1)]
    letters += [Symbol.y(b) for b in range(1, beta_star + 1)]
    letters += [Symbol.y_adjoint(b) for b in range(1, beta_star + 1)]
    h: dict[Word, complex] = {}
    for _ in range(terms):
        length = int(rng.integers(1, degree + 1))
        word = tuple(letters[int(i)] for i in rng.integers(0, len(letters), size=length))
        h[word] = h.get(word, 0j) + complex(rng.normal(), rng.normal()) / 2
    return NCPolynomial(h, alpha_star, beta_star)


def random_self_adjoint_q(
    rng: np.random.Generator,
    alpha_star: int,
    beta_star: int,
    degree: int,
    terms: int = 3,
) -> NCPolynomial:
    """Random q with q(0) = 0 and q = q^*, built as h + h^* from random monomials."""
    half = random_polynomial(rng, alpha_star, beta_star, degree, terms)
    return half + half.adjoint()


def random_wigner(rng: np.random.Generator, N: int) -> np.ndarray:
    A = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    return (A + A.conj().T) / np.sqrt(2 * N)


def semicircle_stieltjes(z: complex, center: float = 1.0) -> complex:
    """Stieltjes transform of the standard semicircle law shifted to `center`."""
    w = complex(z) - center
    root = np.sqrt(w * w - 4 + 0j)
    candidate = (-w + root) / 2
    if candidate.imag < 0:
        candidate = (-w - root) / 2
    return complex(candidate)
