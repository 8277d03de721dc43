"""Large-N expansion of the rank-one spherical integral.

For a spectrum ``B`` and tilt ``theta``,

    exp(-N J(theta)) I_N(theta, B) = m0 + m1/N + O(N^-2)

with ``m0 = A_2^{-1/2}`` and ``m1 = m0 (3/2 A_4/A_2^2 - 5/3 A_3^2/A_2^3 + 1/6)``
in the real case; the complex case halves ``m1`` and uses ``J = int_0^theta R``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DisagreementError, DomainError, IllConditioned, ShapeError
from .gaussmoments import ComplexQuadraticForm, Poly2, gaussian_moment
from .spectra import (
    Spectrum,
    ThetaWindow,
    f_g,
    r_integral,
    solve_v,
    tilt_denominators,
)

__all__ = [
    "ExpansionResult",
    "ComplexQuadraticForm",
    "AppendixReport",
    "RichardsonEstimate",
    "coefficients",
    "unitary_direct",
    "log_i_approx",
    "k_matrix",
    "k_det_closed_form",
    "appendix_check",
    "appendix_closed_forms",
    "appendix_polynomials",
    "richardson_extract",
]

_UNITARY_ROUTE_TOL = 1e-12


@dataclass(frozen=True)
class ExpansionResult:
    beta: int
    theta: float
    v: float
    A: dict  # k -> A_k for k = 2..k_max
    F: float
    G: float
    m0: float
    m1: float
    J: float
    admissible: bool

    @property
    def A2(self) -> float:
        return self.A[2]

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "theta": self.theta,
            "v": self.v,
            "A2": self.A[2],
            "A3": self.A[3],
            "A4": self.A[4],
            "F": self.F,
            "G": self.G,
            "m0": self.m0,
            "m1": self.m1,
            "J": self.J,
            "admissible": self.admissible,
        }


def _window(spec: Spectrum, window) -> ThetaWindow:
    if isinstance(window, ThetaWindow):
        return window
    return ThetaWindow.for_spectrum(spec, float(window))


def _real_twin(spec: Spectrum, theta: float) -> tuple[Spectrum, float]:
    """Real-case spectrum and tilt carrying the same integral (complex case doubles)."""
    if spec.beta == 2:
        return spec.doubled(), 0.5 * theta
    return spec, theta


def _m1_bracket(a2: float, a3: float, a4: float) -> float:
    # 3/2 A4/A2^2 - 5/3 A3^2/A2^3 + 1/6 over a common denominator; exact 0 when all A_k = 1
    return (9.0 * a4 * a2 - 10.0 * a3 * a3 + a2**3) / (6.0 * a2**3)


def _real_coefficients(spec: Spectrum, theta: float, k_max: int):
    if theta == 0.0:
        mean = float(np.mean(spec.eigenvalues))
        lam = spec.eigenvalues
        A = {k: 1.0 for k in range(2, k_max + 1)}
        return mean, A, float(np.mean(lam)), float(np.mean(lam * lam)), 1.0, 0.0, 0.0
    tp = solve_v(spec, theta)
    d = tilt_denominators(spec, theta, tp.v)
    A = {k: float(np.mean(d ** (-k))) for k in range(2, k_max + 1)}
    F, G = f_g(spec, theta, tp)
    m0 = 1.0 / math.sqrt(A[2])
    m1 = m0 * _m1_bracket(A[2], A[3], A[4])
    J = r_integral(spec, theta, tp)
    return tp.v, A, F, G, m0, m1, J


def coefficients(spec: Spectrum, window, k_max: int = 4) -> ExpansionResult:
    """First two expansion coefficients and the exponent for ``spec.beta``.

    The complex case is evaluated through the doubled real spectrum at
    ``theta/2`` and checked against :func:`unitary_direct`.
    """
    if k_max < 4:
        raise DomainError("k_max must be at least 4")
    win = _window(spec, window)
    theta = win.theta
    twin, t_eff = _real_twin(spec, theta)
    v, A, F, G, m0, m1, J = _real_coefficients(twin, t_eff, k_max)
    if spec.beta == 2:
        # I_N^(2)(theta, B) = I_2N^(1)(theta/2, D_2N): 1/(2N) corrections and a doubled exponent
        m1 *= 0.5
        J *= 2.0
        direct = unitary_direct(spec, theta, k_max)
        gaps = [abs(direct.m0 - m0), abs(direct.m1 - m1), abs(direct.J - J), abs(direct.v - v)]
        gaps += [abs(direct.A[k] - A[k]) for k in A]
        if max(gaps) > _UNITARY_ROUTE_TOL * max(1.0, abs(J)):
            raise DisagreementError(f"doubling route disagrees with direct complex formula: {max(gaps):.3e}")
    return ExpansionResult(
        beta=spec.beta, theta=theta, v=v, A=A, F=F, G=G, m0=m0, m1=m1, J=J,
        admissible=win.admissible,
    )


def unitary_direct(spec: Spectrum, theta: float, k_max: int = 4) -> ExpansionResult:
    """Complex-case coefficients from ``A_k = mean((1 - theta lambda + theta v)^-k)``, no doubling."""
    lam = spec.eigenvalues
    win = ThetaWindow.for_spectrum(spec, theta)
    if theta == 0.0:
        A = {k: 1.0 for k in range(2, k_max + 1)}
        return ExpansionResult(2, theta, float(np.mean(lam)), A, float(np.mean(lam)),
                               float(np.mean(lam * lam)), 1.0, 0.0, 0.0, win.admissible)
    # v = R(theta): same tilt equation with 2*theta' = theta
    v = solve_v(Spectrum(lam), 0.5 * theta).v
    d = 1.0 - theta * (lam - v)
    if np.any(d <= 0):
        raise DomainError("nonpositive denominator in complex-case sums")
    A = {k: float(np.mean(d ** (-k))) for k in range(2, k_max + 1)}
    m0 = 1.0 / math.sqrt(A[2])
    m1 = 0.5 * m0 * _m1_bracket(A[2], A[3], A[4])
    J = float(theta * v - np.mean(np.log1p(-theta * (lam - v))))
    F = float(np.mean(lam / d**2))
    G = float(np.mean(lam * lam / d**2))
    return ExpansionResult(2, theta, float(v), A, F, G, m0, m1, J, win.admissible)


def log_i_approx(spec: Spectrum, window, N: int, order: int = 1) -> float:
    """``log I_N`` from the expansion: ``N J + log(m0 [+ m1/N])``."""
    if N < 1:
        raise ShapeError("N must be positive")
    if spec.n != N:
        raise ShapeError(f"spectrum has {spec.n} eigenvalues but N={N}")
    if order not in (0, 1):
        raise DomainError("order must be 0 or 1")
    res = coefficients(spec, window)
    if res.theta == 0.0:
        return 0.0
    pref = res.m0 if order == 0 else res.m0 + res.m1 / N
    return N * res.J + math.log(pref)


def k_matrix(spec: Spectrum, window, t: float | None = None) -> ComplexQuadraticForm:
    """The 2x2 form ``K~(t)``; ``t = theta`` gives ``K`` with ``det K = A_2``.

    ``A_2``, ``F`` and ``G`` are taken at ``(theta, v(theta))`` while ``t``
    only enters the prefactors.  Complex spectra are handled through their
    real twin.
    """
    theta = _window(spec, window).theta
    twin, th = _real_twin(spec, theta)
    if t is None:
        t = th
    if th == 0.0:
        lam = twin.eigenvalues
        v, a2 = float(np.mean(lam)), 1.0
        F, G = float(np.mean(lam)), float(np.mean(lam * lam))
    else:
        tp = solve_v(twin, th)
        v = tp.v
        a2 = float(np.mean(tilt_denominators(twin, th, v) ** -2))
        F, G = f_g(twin, th, tp)
    p = (1 - v) ** 2 * a2 + 2 * (1 - v) * F + G
    r = (1 + v) ** 2 * a2 - 2 * (1 + v) * F + G
    q = (1 - v * v) * a2 + 2 * v * F - G
    return ComplexQuadraticForm.from_entries(1 + t * p, -1j * t * q, 1 - t * r)


def k_det_closed_form(a2: float, theta: float, t: float) -> float:
    """``det K~(t) = 1 + (A_2 - 1)(2t/theta - t^2/theta^2)``; equals ``A_2`` at ``t = theta``."""
    s = t / theta
    return 1.0 + (a2 - 1.0) * (2.0 * s - s * s)


# ---------------------------------------------------------------------------
# second-order bookkeeping: f_0, f_1, f_2 and their combination into m1
# ---------------------------------------------------------------------------


def appendix_closed_forms(a2: float, a3: float, a4: float, theta: float):
    """Closed forms of the ``1/N`` coefficients of ``f_0(theta)``, ``f_1(t)``, ``f_2(t)``.

    Returns ``(f0_coef, f1, f2)`` where ``f1`` and ``f2`` are callables of ``t``.
    """
    f0 = (7.0 / 6.0 - 3.0 / a2 + 2.0 * a3 / a2**2 - 5.0 / 3.0 * a3**2 / a2**3
          + 1.5 * a4 / a2**2) / math.sqrt(a2)

    def det(t):
        return k_det_closed_form(a2, theta, t)

    def f1(t):
        num = 2.0 * t * (t - theta) * (2.0 * t * a2**2 - a3 * (t - 2.0 * theta) - a2 * (t + 2.0 * theta))
        return num / (theta**3 * det(t) ** 2.5)

    def f2(t):
        return 2.0 * a2 / det(t) ** 1.5

    return f0, f1, f2


def _analytic_combination(a2: float, a3: float) -> tuple[float, float]:
    """``-theta f1'(theta)`` and ``(theta^2/2 f2'' + theta f2')(theta)`` differentiated by hand."""
    s = math.sqrt(a2)
    return (-4.0 + 6.0 / a2 - 2.0 * a3 / a2**2) / s, (3.0 - 3.0 / a2) / s


def _central(fn, t: float, h: float) -> tuple[float, float]:
    f_p, f_0, f_m = fn(t + h), fn(t), fn(t - h)
    return (f_p - f_m) / (2.0 * h), (f_p - 2.0 * f_0 + f_m) / (h * h)


def _richardson_derivatives(fn, t: float, h: float, levels: int = 3) -> tuple[complex, complex]:
    """First and second derivatives from central differences, extrapolated in ``h^2``."""
    rows = [_central(fn, t, h / 2**k) for k in range(levels)]
    d1 = [r[0] for r in rows]
    d2 = [r[1] for r in rows]
    for j in range(1, levels):
        w = 4.0**j
        d1 = [(w * d1[i + 1] - d1[i]) / (w - 1.0) for i in range(len(d1) - 1)]
        d2 = [(w * d2[i + 1] - d2[i]) / (w - 1.0) for i in range(len(d2) - 1)]
    return d1[0], d2[0]


def appendix_polynomials(spec: Spectrum, theta: float):
    """The polynomials ``p0`` (at ``theta``) and ``p1(t)``, ``p2(t)`` in ``(x1, x2)``.

    Built from the per-eigenvalue linear forms ``i(1-v+lambda)x1 + (1+v-lambda)x2``.
    Returns ``(p0, p1, p2)`` with ``p1``/``p2`` callables of ``t``.
    """
    tp = solve_v(spec, theta)
    v = tp.v
    lam = spec.eigenvalues
    d = tilt_denominators(spec, theta, v)
    a = 1j * (1.0 - v + lam)
    c = 1.0 + v - lam

    def power_sum(k: int, p: int) -> Poly2:
        # (1/N) sum (a x1 + c x2)^k / d^p
        return Poly2({
            (m, k - m): math.comb(k, m) * complex(np.mean(a**m * c ** (k - m) / d**p))
            for m in range(k + 1)
        })

    s12, s23, s33, s44 = power_sum(1, 2), power_sum(2, 3), power_sum(3, 3), power_sum(4, 4)
    a2 = float(np.mean(d**-2))
    p0 = (theta**2 / 2.0) * s44 + (theta**3 / 9.0) * (s33 * s33)

    def p1(t):
        return (2.0 * t * t / 3.0) * (s12 * s33) + (2.0 * t) * s23

    def p2(t):
        return Poly2.constant(2.0 * a2) + (2.0 * t) * (s12 * s12)

    return p0, p1, p2


@dataclass(frozen=True)
class AppendixReport:
    theta: float
    A2: float
    A3: float
    A4: float
    f0_coef: float
    f1_coef: float
    f2_coef: float
    f1_coef_fd: float
    f2_coef_fd: float
    combined: float
    m1: float
    difference: float
    fd_difference: float
    wick_f0_coef: float
    wick_f1_coef: float
    wick_f2_coef: float
    wick_f2_at_theta: float
    closed_f2_at_theta: float
    wick_differences: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def appendix_check(spec: Spectrum, window, fd_step: float = 1e-5) -> AppendixReport:
    """Recombine the ``f_0, f_1, f_2`` pieces into ``m1`` two ways.

    The closed forms are differentiated analytically and by central
    differences at ``fd_step``; independently, the three coefficients are
    recomputed from Gaussian moments of ``p0, p1, p2`` under ``K~(t)``.
    Everything is in the real convention (complex spectra use their twin), so
    ``m1`` here is the real-case coefficient of the twin.
    """
    theta = _window(spec, window).theta
    if theta == 0.0:
        raise DomainError("appendix check needs theta != 0")
    twin, th = _real_twin(spec, theta)
    tp = solve_v(twin, th)
    d = tilt_denominators(twin, th, tp.v)
    a2, a3, a4 = (float(np.mean(d ** (-k))) for k in (2, 3, 4))
    m1 = _m1_bracket(a2, a3, a4) / math.sqrt(a2)

    f0, f1, f2 = appendix_closed_forms(a2, a3, a4, th)
    f1_coef, f2_coef = _analytic_combination(a2, a3)
    d1f1, _ = _central(f1, th, fd_step)
    d1f2, d2f2 = _central(f2, th, fd_step)
    f1_fd = -th * d1f1
    f2_fd = 0.5 * th * th * d2f2 + th * d1f2
    combined = f0 + f1_coef + f2_coef

    p0, p1, p2 = appendix_polynomials(twin, th)

    def k_at(t):
        return k_matrix(twin, th, t)

    w0 = gaussian_moment(k_at(th), p0).real
    h = 0.2 * abs(th)
    e1, _ = _richardson_derivatives(lambda t: gaussian_moment(k_at(t), p1(t)), th, h)
    g1, g2 = _richardson_derivatives(lambda t: gaussian_moment(k_at(t), p2(t)), th, h)
    w1 = (-th * e1).real
    w2 = (0.5 * th * th * g2 + th * g1).real
    w2_theta = gaussian_moment(k_at(th), p2(th)).real

    return AppendixReport(
        theta=th, A2=a2, A3=a3, A4=a4,
        f0_coef=f0, f1_coef=f1_coef, f2_coef=f2_coef,
        f1_coef_fd=f1_fd, f2_coef_fd=f2_fd,
        combined=combined, m1=m1, difference=combined - m1,
        fd_difference=(f0 + f1_fd + f2_fd) - m1,
        wick_f0_coef=w0, wick_f1_coef=w1, wick_f2_coef=w2,
        wick_f2_at_theta=w2_theta, closed_f2_at_theta=f2(th),
        wick_differences={
            "f0": w0 - f0,
            "f1": w1 - f1_coef,
            "f2": w2 - f2_coef,
            "f2_at_theta": w2_theta - f2(th),
        },
    )


# ---------------------------------------------------------------------------
# numerical extraction of m_0, m_1, m_2, ... from exact finite-N data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RichardsonEstimate:
    index: int
    value: float
    error: float


def _fit_inverse_powers(ns: np.ndarray, vals: np.ndarray) -> np.ndarray:
    h = 1.0 / ns
    vander = np.vander(h, N=len(h), increasing=True)
    return np.linalg.solve(vander, vals)


def richardson_extract(values, order: int = 1, min_rel_gap: float = 0.02) -> list[RichardsonEstimate]:
    """Estimate ``m_0..m_order`` from ``[(N, prefactor), ...]``.

    The prefactor is interpolated by a polynomial in ``1/N`` through all
    points (the Richardson tableau in closed form); the error of each
    coefficient is its change when the smallest-N point is dropped.
    """
    pts = sorted((int(n), float(x)) for n, x in values)
    ns = np.array([p[0] for p in pts], dtype=float)
    vals = np.array([p[1] for p in pts])
    if len(set(ns)) != len(ns):
        raise IllConditioned("N values must be distinct")
    if len(ns) < order + 2:
        raise IllConditioned(f"need at least {order + 2} distinct N values")
    h = 1.0 / ns
    gaps = np.abs(np.diff(h)) / np.max(h)
    if np.min(gaps) < min_rel_gap:
        raise IllConditioned("N values too close for a stable extrapolation")
    if np.linalg.cond(np.vander(h, increasing=True)) > 1e14:
        raise IllConditioned("extrapolation system is numerically singular")
    full = _fit_inverse_powers(ns, vals)
    reduced = _fit_inverse_powers(ns[1:], vals[1:])
    return [
        RichardsonEstimate(index=k, value=float(full[k]), error=float(abs(full[k] - reduced[k])))
        for k in range(order + 1)
    ]
