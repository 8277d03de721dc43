"""Empirical spectra and their transforms.

Everything here works in the real-symmetric parameterization, where the tilt
denominators are ``1 - 2*theta*(lambda_i - v)``.  The unitary case is obtained
by the caller through :meth:`Spectrum.doubled` and ``theta / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "Spectrum",
    "ThetaWindow",
    "TiltPoint",
    "admissible_bound",
    "hilbert",
    "solve_v",
    "solve_v_many",
    "a_coeff",
    "f_g",
    "fg_identities",
    "r_transform",
    "r_integral",
    "r_integral_quadrature",
    "tilt_denominators",
]

_BISECT_WIDTH = 1e-8
_NEWTON_RESIDUAL = 1e-14
_NEWTON_MAXITER = 30


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigenvalue list of a symmetric (beta=1) or Hermitian (beta=2) matrix."""

    eigenvalues: np.ndarray
    beta: int = 1

    def __post_init__(self):
        lam = np.sort(np.asarray(self.eigenvalues, dtype=float).ravel())
        if lam.size == 0:
            raise DomainError("spectrum must be nonempty")
        if not np.all(np.isfinite(lam)):
            raise DomainError("spectrum entries must be finite")
        if self.beta not in (1, 2):
            raise DomainError(f"beta must be 1 or 2, got {self.beta!r}")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def n(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def bound(self) -> float:
        """Operator norm ``M = max |lambda_i|``."""
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def is_constant(self) -> bool:
        return bool(self.eigenvalues[0] == self.eigenvalues[-1])

    def doubled(self) -> "Spectrum":
        """Each eigenvalue twice; the real 2N-dimensional twin of a Hermitian spectrum."""
        return Spectrum(np.repeat(self.eigenvalues, 2), beta=1)

    def with_beta(self, beta: int) -> "Spectrum":
        return Spectrum(self.eigenvalues, beta=beta)

    def shifted(self, c: float) -> "Spectrum":
        return Spectrum(self.eigenvalues + c, beta=self.beta)

    @classmethod
    def constant(cls, value: float, n: int, beta: int = 1) -> "Spectrum":
        return cls(np.full(n, float(value)), beta=beta)

    @classmethod
    def from_file(cls, path, beta: int | None = None) -> "Spectrum":
        """Read one eigenvalue per line; an optional ``# beta=<1|2>`` header sets beta."""
        text = Path(path).read_text()
        return cls.from_text(text, beta=beta)

    @classmethod
    def from_text(cls, text: str, beta: int | None = None) -> "Spectrum":
        header_beta = None
        values = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].replace(" ", "")
                if body.startswith("beta="):
                    try:
                        header_beta = int(body[len("beta="):])
                    except ValueError:
                        raise DomainError(f"line {lineno}: bad beta header {raw!r}") from None
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise DomainError(f"line {lineno}: not a number: {raw!r}") from None
        b = beta if beta is not None else (header_beta if header_beta is not None else 1)
        return cls(np.array(values), beta=b)

    def to_text(self) -> str:
        lines = [f"# beta={self.beta}"]
        lines += [repr(float(x)) for x in self.eigenvalues]
        return "\n".join(lines) + "\n"


def admissible_bound(m: float) -> float:
    """Half-width ``1/(4M^2 + 10M + 1)`` of the theta window on which the expansion is proved."""
    return 1.0 / (4.0 * m * m + 10.0 * m + 1.0)


@dataclass(frozen=True)
class ThetaWindow:
    theta: float
    bound: float
    admissible: bool

    @classmethod
    def for_spectrum(cls, spec: Spectrum, theta: float, bound: float | None = None) -> "ThetaWindow":
        """Window for ``spec``; pass ``bound`` to override the default admissibility constant."""
        b = admissible_bound(spec.bound) if bound is None else float(bound)
        theta = float(theta)
        return cls(theta=theta, bound=b, admissible=abs(theta) < b)


@dataclass(frozen=True)
class TiltPoint:
    """Solution ``v = R(2 theta)`` of the tilt equation, with its fixed-point residuals."""

    v: float
    theta_eff: float
    residual_a1: float
    residual_mean: float


def _as_theta(window_or_theta) -> float:
    if isinstance(window_or_theta, ThetaWindow):
        return window_or_theta.theta
    return float(window_or_theta)


def hilbert(spec: Spectrum, z: float, k: int = 1) -> float:
    """Hilbert transform ``(1/N) sum 1/(z - lambda_i)`` and its derivatives.

    ``k = 1`` is the transform itself and ``k >= 2`` its ``(k-1)``-th derivative
    in ``z``.  ``k = 0`` gives the log-potential ``(1/N) sum log|z - lambda_i|``,
    whose derivative is the transform, so the family is closed under
    differentiation.
    """
    lam = spec.eigenvalues
    if lam[0] <= z <= lam[-1]:
        raise DomainError(f"z={z} lies inside the spectral hull [{lam[0]}, {lam[-1]}]")
    if k < 0:
        raise DomainError("k must be a nonnegative integer")
    diff = z - lam
    if k == 0:
        return float(np.mean(np.log(np.abs(diff))))
    sign = -1.0 if (k - 1) % 2 else 1.0
    return float(sign * math.factorial(k - 1) * np.mean(diff ** (-k)))


def _solve_positive(lam: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Vectorized tilt solve for ``thetas > 0``.

    Root of ``psi(v) = mean((lambda - v)/d)`` with ``d = 1 - 2 theta (lambda - v)``;
    ``psi' = -A_2`` so the equation stays well conditioned as theta -> 0.
    """
    n = lam.size
    lmin, lmax = lam[0], lam[-1]
    lo = np.maximum(lmin, lmax - (1.0 - 1.0 / n) / (2.0 * thetas))
    hi = np.full_like(thetas, lmax)
    lam_col = lam[:, None]

    def psi_and_slope(v):
        d = 1.0 - 2.0 * thetas * (lam_col - v)
        inv = 1.0 / d
        return np.mean((lam_col - v) * inv, axis=0), -np.mean(inv * inv, axis=0)

    for _ in range(200):
        if np.all(hi - lo <= _BISECT_WIDTH):
            break
        mid = 0.5 * (lo + hi)
        val, _ = psi_and_slope(mid)
        pos = val > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    else:
        raise ConvergenceError("bisection failed to shrink the bracket")

    v = 0.5 * (lo + hi)
    # Newton polish, clamped to the bracket
    for _ in range(_NEWTON_MAXITER):
        val, slope = psi_and_slope(v)
        if np.all(np.abs(val) <= _NEWTON_RESIDUAL):
            break
        step = np.where(slope != 0.0, val / slope, 0.0)
        v = np.clip(v - step, lo - _BISECT_WIDTH, hi + _BISECT_WIDTH)
    return v


def solve_v_many(spec: Spectrum, thetas) -> np.ndarray:
    """Tilt points ``v(theta)`` for an array of thetas (``v(0)`` is the spectral mean)."""
    lam = spec.eigenvalues
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    out = np.empty_like(thetas)
    if spec.is_constant:
        out[:] = lam[0]
        return out
    zero = thetas == 0.0
    out[zero] = float(np.mean(lam))
    pos = thetas > 0
    if np.any(pos):
        out[pos] = _solve_positive(lam, thetas[pos])
    neg = thetas < 0
    if np.any(neg):
        # v(theta; lambda) = -v(-theta; -lambda)
        out[neg] = -_solve_positive(-lam[::-1], -thetas[neg])
    return out


def tilt_denominators(spec: Spectrum, theta: float, v: float) -> np.ndarray:
    """``1 - 2 theta lambda_i + 2 theta v``; raises if any is nonpositive (wrong branch)."""
    d = 1.0 - 2.0 * theta * (spec.eigenvalues - v)
    if np.any(d <= 0.0):
        raise DomainError("tilt denominator is nonpositive; v is not on the correct branch")
    return d


def solve_v(spec: Spectrum, window) -> TiltPoint:
    """Solve ``H(v + 1/(2 theta)) = 2 theta`` on the branch outside the spectrum."""
    theta = _as_theta(window)
    v = float(solve_v_many(spec, [theta])[0])
    d = tilt_denominators(spec, theta, v)
    a1 = float(np.mean(1.0 / d))
    mean = float(np.mean(spec.eigenvalues / d))
    tp = TiltPoint(v=v, theta_eff=theta, residual_a1=abs(a1 - 1.0), residual_mean=abs(mean - v))
    if tp.residual_a1 > 1e-12 or tp.residual_mean > 1e-10:
        raise ConvergenceError(
            f"tilt equation residuals too large: {tp.residual_a1:.3e}, {tp.residual_mean:.3e}"
        )
    return tp


def _v_of(spec: Spectrum, window, v) -> tuple[float, float]:
    theta = _as_theta(window)
    if v is None:
        v = solve_v(spec, theta)
    vv = v.v if isinstance(v, TiltPoint) else float(v)
    return theta, vv


def a_coeff(spec: Spectrum, window, v: TiltPoint | float | None = None, k: int = 2) -> float:
    """``A_k = (1/N) sum (1 - 2 theta lambda_i + 2 theta v)^(-k)``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    theta, vv = _v_of(spec, window, v)
    d = tilt_denominators(spec, theta, vv)
    return float(np.mean(d ** (-k)))


def f_g(spec: Spectrum, window, v: TiltPoint | float | None = None) -> tuple[float, float]:
    """Direct sums ``F = mean(lambda/d^2)`` and ``G = mean(lambda^2/d^2)``."""
    theta, vv = _v_of(spec, window, v)
    d2 = tilt_denominators(spec, theta, vv) ** 2
    lam = spec.eigenvalues
    return float(np.mean(lam / d2)), float(np.mean(lam * lam / d2))


def fg_identities(theta: float, v: float, a2: float) -> tuple[float, float]:
    """``F`` and ``G`` reconstructed from ``A_2`` alone (theta != 0)."""
    if theta == 0.0:
        raise DomainError("the F/G identities are singular at theta = 0")
    s = 1.0 + 2.0 * theta * v
    f = -1.0 / (2.0 * theta) + s * a2 / (2.0 * theta)
    g = -(1.0 + 4.0 * theta * v) / (4.0 * theta**2) + s * s * a2 / (4.0 * theta**2)
    return f, g


def r_transform(spec: Spectrum, z: float) -> float:
    """``R(z) = H^{-1}(z) - 1/z``; equals the tilt point at ``theta = z/2``."""
    if z == 0.0:
        raise DomainError("R-transform is evaluated at z != 0")
    return float(solve_v_many(spec, [0.5 * z])[0])


def r_integral(spec: Spectrum, window, v: TiltPoint | float | None = None) -> float:
    """Closed form ``theta v - (1/2N) sum log d_i``, equal to ``(1/2) int_0^{2 theta} R``."""
    theta, vv = _v_of(spec, window, v)
    if theta == 0.0:
        return 0.0
    tilt_denominators(spec, theta, vv)
    logs = np.log1p(-2.0 * theta * (spec.eigenvalues - vv))
    return float(theta * vv - 0.5 * np.mean(logs))


def r_integral_quadrature(spec: Spectrum, theta: float, points: int = 64) -> float:
    """``(1/2) int_0^{2 theta} R(s) ds = int_0^theta v(t) dt`` by Gauss-Legendre."""
    if theta == 0.0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(points)
    t = 0.5 * theta * (x + 1.0)
    return float(0.5 * theta * np.dot(w, solve_v_many(spec, t)))
