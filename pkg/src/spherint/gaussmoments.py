"""Two-dimensional complex Gaussian integrals.

The normalized integral of a polynomial against ``exp(-<x, K x>/2)`` for a
complex-symmetric ``K`` with positive-definite real part is computed with
Wick pairings of the covariance ``K^{-1}``.  A tensor-product Gauss-Legendre
quadrature is kept alongside as an independent check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegreeOverflow, PositivityError

__all__ = [
    "ComplexQuadraticForm",
    "Poly2",
    "gaussian_norm",
    "gaussian_moment",
    "monomial_moment",
    "quadrature_2d",
    "quadrature_moment",
    "change_of_variable_check",
]

MAX_DEGREE = 32


@dataclass(frozen=True, eq=False)
class ComplexQuadraticForm:
    """2x2 complex symmetric matrix; ``re_pd`` tells whether Re(K) is positive definite."""

    entries: np.ndarray

    def __post_init__(self):
        k = np.array(self.entries, dtype=complex)
        if k.shape != (2, 2):
            raise ValueError("quadratic form must be 2x2")
        if k[0, 1] != k[1, 0]:
            raise ValueError("quadratic form must be symmetric")
        k.setflags(write=False)
        object.__setattr__(self, "entries", k)

    @classmethod
    def from_entries(cls, k11, k12, k22) -> "ComplexQuadraticForm":
        return cls(np.array([[k11, k12], [k12, k22]], dtype=complex))

    @property
    def re_pd(self) -> bool:
        r = self.entries.real
        return bool(r[0, 0] > 0 and r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0] > 0)

    @property
    def det(self) -> complex:
        k = self.entries
        return complex(k[0, 0] * k[1, 1] - k[0, 1] * k[1, 0])

    def inverse(self) -> np.ndarray:
        k = self.entries
        det = self.det
        return np.array([[k[1, 1], -k[0, 1]], [-k[1, 0], k[0, 0]]], dtype=complex) / det

    def require_pd(self) -> None:
        if not self.re_pd:
            raise PositivityError("real part of the quadratic form is not positive definite")


def _as_form(k) -> ComplexQuadraticForm:
    return k if isinstance(k, ComplexQuadraticForm) else ComplexQuadraticForm(np.asarray(k))


class Poly2:
    """Polynomial in two variables with complex coefficients, ``{(i, j): c}`` for ``c x1^i x2^j``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for (i, j), c in (terms or {}).items():
            if i < 0 or j < 0:
                raise ValueError("degrees must be nonnegative")
            c = complex(c)
            if c != 0:
                key = (int(i), int(j))
                clean[key] = clean.get(key, 0j) + c
        self.terms = clean

    @classmethod
    def constant(cls, c) -> "Poly2":
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, i: int, j: int, c=1.0) -> "Poly2":
        return cls({(i, j): c})

    @classmethod
    def linear(cls, c1, c2) -> "Poly2":
        return cls({(1, 0): c1, (0, 1): c2})

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self.terms), default=0)

    def _coerce(self, other) -> "Poly2":
        if isinstance(other, Poly2):
            return other
        return Poly2.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0j) + c
        return Poly2(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly2({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly2):
            c = complex(other)
            return Poly2({k: c * v for k, v in self.terms.items()})
        out: dict = {}
        for (a, b), c in self.terms.items():
            for (e, f), g in other.terms.items():
                key = (a + e, b + f)
                out[key] = out.get(key, 0j) + c * g
        return Poly2(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        out = Poly2.constant(1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __call__(self, x1, x2):
        x1 = np.asarray(x1)
        x2 = np.asarray(x2)
        total = np.zeros(np.broadcast(x1, x2).shape, dtype=complex)
        for (i, j), c in self.terms.items():
            total = total + c * x1**i * x2**j
        return total

    def __repr__(self):
        body = " + ".join(f"({c:.6g})*x1^{i}*x2^{j}" for (i, j), c in sorted(self.terms.items()))
        return f"Poly2({body or '0'})"


def gaussian_norm(K) -> complex:
    """``det(K)^(-1/2)`` on the branch with positive real part."""
    form = _as_form(K)
    form.require_pd()
    return cmath.exp(-0.5 * cmath.log(form.det))


@lru_cache(maxsize=None)
def _double_factorial(n: int) -> int:
    # (-1)!! = 1
    return 1 if n <= 0 else n * _double_factorial(n - 2)


@lru_cache(maxsize=None)
def _pairing_counts(a: int, b: int) -> tuple:
    """``(k, count)``: pairings of a copies of x1 and b of x2 with k mixed pairs."""
    out = []
    for k in range(min(a, b) + 1):
        if (a - k) % 2 or (b - k) % 2:
            continue
        count = (
            math.comb(a, k) * math.comb(b, k) * math.factorial(k)
            * _double_factorial(a - k - 1) * _double_factorial(b - k - 1)
        )
        out.append((k, count))
    return tuple(out)


def monomial_moment(cov: np.ndarray, a: int, b: int) -> complex:
    """Wick sum ``E[x1^a x2^b]`` for a centered form with covariance ``cov``."""
    if a + b > MAX_DEGREE:
        raise DegreeOverflow(f"degree {a + b} exceeds {MAX_DEGREE}")
    if (a + b) % 2:
        return 0j
    c11, c12, c22 = complex(cov[0, 0]), complex(cov[0, 1]), complex(cov[1, 1])
    total = 0j
    for k, count in _pairing_counts(a, b):
        total += count * c12**k * c11 ** ((a - k) // 2) * c22 ** ((b - k) // 2)
    return total


def gaussian_moment(K, P: Poly2) -> complex:
    """``(2 pi)^{-1} int P(x) exp(-<x, K x>/2) dx`` via Wick pairings of ``K^{-1}``."""
    form = _as_form(K)
    form.require_pd()
    if P.degree > MAX_DEGREE:
        raise DegreeOverflow(f"degree {P.degree} exceeds {MAX_DEGREE}")
    cov = form.inverse()
    total = 0j
    for (a, b), c in P.terms.items():
        total += c * monomial_moment(cov, a, b)
    return gaussian_norm(form) * total


def _gl_panel_rule(lo: float, hi: float, panels: int, order: int = 16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def quadrature_2d(func, limit: float = 12.0, tol: float = 1e-9, max_panels: int = 256,
                  limits=None) -> complex:
    """Adaptive tensor-product Gauss-Legendre integral of ``func(x1, x2)`` over a box.

    Panels are doubled until two successive estimates differ by less than
    ``tol`` (absolute, or relative to the estimate when that is larger).
    """
    if limits is None:
        limits = ((-limit, limit), (-limit, limit))
    (a1, b1), (a2, b2) = limits
    prev = None
    panels = 4
    while panels <= max_panels:
        x1, w1 = _gl_panel_rule(a1, b1, panels)
        x2, w2 = _gl_panel_rule(a2, b2, panels)
        vals = func(x1[:, None], x2[None, :])
        est = complex(w1 @ vals @ w2)
        if prev is not None and abs(est - prev) < tol * max(1.0, abs(est)):
            return est
        prev = est
        panels *= 2
    return prev


def _tail_limit(k: np.ndarray, tail: float = 40.0) -> float:
    """Half-width of a box outside which ``|exp(-<x, K x>/2)| < exp(-tail)``."""
    low = float(np.linalg.eigvalsh(0.5 * (k.real + k.real.T))[0])
    if low <= 0:
        raise PositivityError("real part of the quadratic form is not positive definite")
    return math.sqrt(2.0 * tail / low)


def quadrature_moment(K, P: Poly2 | None = None, limit: float | None = None, tol: float = 1e-9) -> complex:
    """Brute-force counterpart of :func:`gaussian_moment` (or :func:`gaussian_norm` if ``P`` is None)."""
    form = _as_form(K)
    form.require_pd()
    k = form.entries
    if limit is None:
        limit = _tail_limit(k)
    poly = P if P is not None else Poly2.constant(1.0)

    def integrand(x1, x2):
        q = k[0, 0] * x1 * x1 + 2.0 * k[0, 1] * x1 * x2 + k[1, 1] * x2 * x2
        return poly(x1, x2) * np.exp(-0.5 * q)

    return quadrature_2d(integrand, limit=limit, tol=tol) / (2.0 * math.pi)


def change_of_variable_check(K, A, b, P: Poly2, limit: float | None = None, tol: float = 1e-10):
    """Both sides of the diagonal change of variables ``x = A y + b``, by quadrature.

    Returns ``(lhs, rhs)`` normalized by ``1/(2 pi)``; ``A`` is a length-2
    vector of diagonal entries (or a diagonal matrix) with positive real parts.
    """
    form = _as_form(K)
    form.require_pd()
    a = np.asarray(A, dtype=complex)
    if a.ndim == 2:
        a = np.diag(a)
    if np.any(a.real <= 0):
        raise PositivityError("diagonal scaling needs positive real parts")
    shift = np.asarray(b, dtype=complex).ravel()
    k = form.entries

    def quad(x1, x2):
        return k[0, 0] * x1 * x1 + 2.0 * k[0, 1] * x1 * x2 + k[1, 1] * x2 * x2

    def lhs_integrand(x1, x2):
        return P(x1, x2) * np.exp(-0.5 * quad(x1, x2))

    def rhs_integrand(y1, y2):
        x1 = a[0] * y1 + shift[0]
        x2 = a[1] * y2 + shift[1]
        return P(x1, x2) * np.exp(-0.5 * quad(x1, x2))

    scaled = a[:, None] * k * a[None, :]
    if limit is None:
        limit = _tail_limit(k)
        half = _tail_limit(scaled)
    else:
        half = limit / float(np.min(np.abs(a)))
    # the shifted Gaussian is centred near -A^{-1} b
    span = [half + abs(shift[i] / a[i]) for i in range(2)]
    lhs = quadrature_2d(lhs_integrand, limit=limit, tol=tol)
    rhs = a[0] * a[1] * quadrature_2d(
        rhs_integrand, tol=tol, limits=((-span[0], span[0]), (-span[1], span[1]))
    )
    return lhs / (2.0 * math.pi), complex(rhs) / (2.0 * math.pi)
