"""Exact complex-case spherical integrals at small N.

* :func:`hciz_exact` evaluates the Harish-Chandra/Itzykson-Zuber determinant
  for two simple spectra.
* :func:`rank_one_exact` is its limit for ``A = diag(theta, 0, ..., 0)``,
  which reduces to a divided difference of ``exp(N theta x)`` over the
  spectrum of ``B``; a Richardson-extrapolated epsilon-ladder of
  :func:`hciz_exact` gives an independent route.
* :func:`schur_ratio` is the normalized Schur polynomial used to restate the
  determinant for integer spectra.

All the determinants involved are violently ill conditioned, so anything
beyond the easy cases runs in mpmath with the working precision raised until
two successive precisions agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np

from .errors import DegenerateInput, DisagreementError, DomainError, GapError, ShapeError

__all__ = [
    "DistinctSpectrum",
    "Partition",
    "HCIZValue",
    "hciz_exact",
    "rank_one_exact",
    "rank_one_extrapolated",
    "schur_ratio",
    "schur_dimension",
    "schur_hciz_identity",
]

GAP_TOLERANCE = 1e-8
MAX_N = 64
MAX_N_RANK_ONE = 24
# double precision loses ~cond*eps; keep the oracle at 1e-12 relative
COND_EXTENDED = 1e4
# base ladder; divided by N^2 since the remainder grows like (N^2 eps)^k
EPS_LADDER = (1e-3, 5e-4, 2.5e-4)


@dataclass(frozen=True, eq=False)
class DistinctSpectrum:
    values: np.ndarray
    min_gap: float

    @classmethod
    def of(cls, values, gap_tolerance: float = GAP_TOLERANCE) -> "DistinctSpectrum":
        if isinstance(values, DistinctSpectrum):
            values = values.values
        vals = np.sort(np.asarray(values, dtype=float).ravel())
        if vals.size == 0:
            raise ShapeError("empty spectrum")
        if not np.all(np.isfinite(vals)):
            raise DomainError("spectrum entries must be finite")
        gap = float(np.min(np.diff(vals))) if vals.size > 1 else math.inf
        if gap <= gap_tolerance:
            raise GapError(f"eigenvalues not simple: min gap {gap:.3e} <= {gap_tolerance:.1e}")
        vals.setflags(write=False)
        return cls(values=vals, min_gap=gap)

    def __len__(self):
        return int(self.values.size)


@dataclass(frozen=True)
class Partition:
    parts: tuple

    @classmethod
    def of(cls, parts) -> "Partition":
        p = tuple(int(x) for x in parts)
        if any(x < 0 for x in p):
            raise DomainError("partition parts must be nonnegative")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise DomainError("partition parts must be weakly decreasing")
        return cls(parts=p)

    def __len__(self):
        return len(self.parts)


@dataclass(frozen=True)
class HCIZValue:
    log_value: float
    value: float | None
    N: int
    method: str
    precision_used: str

    def to_dict(self) -> dict:
        return {
            "log_value": self.log_value,
            "value_if_representable": self.value,
            "N": self.N,
            "method": self.method,
            "precision_used": self.precision_used,
        }


def _make_value(log_value, N: int, method: str, precision: str) -> HCIZValue:
    lv = float(log_value)
    if not math.isfinite(lv):
        raise OverflowError("log of the integral is not representable")
    value = math.exp(lv) if lv < 709.0 else None
    return HCIZValue(log_value=lv, value=value, N=N, method=method, precision_used=precision)


def _log_superfactorial(n: int) -> float:
    """``log prod_{p=1}^{n-1} p!``."""
    return sum(math.lgamma(p + 1) for p in range(1, n))


def _log_abs_vandermonde(x) -> float:
    x = np.asarray(x, dtype=float)
    i, j = np.triu_indices(x.size, k=1)
    return float(np.sum(np.log(np.abs(x[j] - x[i]))))


def _adaptive_mp(fn, start_dps: int, rel_tol: float = 1e-25, max_dps: int = 20000):
    """Evaluate ``fn()`` under increasing mp precision until two runs agree."""
    dps = max(30, int(start_dps))
    with mp.workdps(dps):
        prev = fn()
    while dps <= max_dps:
        dps = int(dps * 1.5) + 10
        with mp.workdps(dps):
            cur = fn()
            if prev == cur or abs(cur - prev) <= rel_tol * abs(cur):
                return cur, dps
        prev = cur
    raise DisagreementError("extended precision did not stabilize")


def _hciz_log_mp(a, b, N: int, start_dps: int):
    def run():
        av = [mp.mpf(float(x)) for x in a]
        bv = [mp.mpf(float(x)) for x in b]
        n = mp.mpf(N)
        m = mp.matrix(N, N)
        for i in range(N):
            for j in range(N):
                m[i, j] = mp.exp(n * av[i] * bv[j])
        det = mp.det(m)
        vand = mp.mpf(1)
        for i in range(N):
            for j in range(i + 1, N):
                vand *= (av[i] - av[j]) * (bv[i] - bv[j])
        const = mp.mpf(1)
        for p in range(1, N):
            const *= mp.factorial(p)
        val = const * det / (n ** ((N * N - N) // 2) * vand)
        if val <= 0:
            return mp.mpf("-inf")
        return mp.log(val)

    return _adaptive_mp(run, start_dps)


def hciz_exact(a, b, N: int | None = None, precision: str = "auto",
               gap_tolerance: float = GAP_TOLERANCE) -> HCIZValue:
    """Complex-case integral for simple spectra ``a`` of ``A`` and ``b`` of ``B``.

    ``precision`` is ``"auto"`` (double only while the row-scaled matrix has a
    condition estimate below ``COND_EXTENDED``), ``"double"`` or ``"extended"``.
    """
    a = DistinctSpectrum.of(a, gap_tolerance)
    b = DistinctSpectrum.of(b, gap_tolerance)
    n = len(a) if N is None else int(N)
    if len(a) != n or len(b) != n:
        raise ShapeError(f"both spectra must have length N={n}")
    if n > MAX_N:
        raise ShapeError(f"N={n} exceeds the cap {MAX_N}")
    if n == 1:
        return _make_value(float(a.values[0] * b.values[0]), 1, "determinant", "double")

    av, bv = a.values, b.values
    expo = n * np.outer(av, bv)
    shift = expo.max(axis=1)
    scaled = np.exp(expo - shift[:, None])
    log_norm = _log_superfactorial(n) - 0.5 * (n * n - n) * math.log(n)
    log_vand = _log_abs_vandermonde(av) + _log_abs_vandermonde(bv)

    use_double = precision == "double"
    if precision == "auto":
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(scaled)
        use_double = bool(np.isfinite(cond) and cond <= COND_EXTENDED)
    elif precision not in ("double", "extended"):
        raise DomainError(f"unknown precision mode {precision!r}")

    if use_double:
        sign, logdet = np.linalg.slogdet(scaled)
        if sign <= 0:
            raise DisagreementError("determinant sign is wrong in double precision; use extended")
        log_val = log_norm + float(np.sum(shift)) + logdet - log_vand
        return _make_value(log_val, n, "determinant", "double")

    start = 30 + int(max(0.0, -log_vand / math.log(10.0)))
    log_val, dps = _hciz_log_mp(av, bv, n, start)
    return _make_value(log_val, n, "determinant", f"mp{dps}")


def _rank_one_log_mp(theta: float, b, N: int, start_dps: int):
    def run():
        s = mp.mpf(N) * mp.mpf(float(theta))
        bv = [mp.mpf(float(x)) for x in b]
        # divided difference exp(s x)[b_1..b_N]; shift by max(s b) for scale
        top = max(s * x for x in bv)
        total = mp.mpf(0)
        for j in range(N):
            den = mp.mpf(1)
            for k in range(N):
                if k != j:
                    den *= bv[j] - bv[k]
            total += mp.exp(s * bv[j] - top) / den
        val = total * mp.factorial(N - 1) / s ** (N - 1)
        if val <= 0:
            return mp.mpf("-inf")
        return top + mp.log(val)

    return _adaptive_mp(run, start_dps)


def rank_one_extrapolated(theta: float, b, N: int | None = None,
                          ladder=None) -> HCIZValue:
    """Limit of :func:`hciz_exact` with ``a = (theta, eps, 2 eps, ...)``, Richardson in eps.

    The ladder sits on the opposite side of zero from theta so that nodes
    never collide; the remainder is O(eps) so two extrapolation levels are
    applied to three ladder points.
    """
    bs = DistinctSpectrum.of(b)
    n = len(bs) if N is None else int(N)
    if len(bs) != n:
        raise ShapeError("length of b must equal N")
    if ladder is None:
        ladder = tuple(e / (n * n) for e in EPS_LADDER)
    side = -1.0 if theta > 0 else 1.0
    vals = []
    dps_used = []
    for eps in ladder:
        a = np.array([theta] + [side * k * eps for k in range(1, n)])
        r = hciz_exact(a, bs.values, n, precision="extended", gap_tolerance=0.0)
        vals.append(mp.mpf(r.log_value))
        dps_used.append(r.precision_used)
    with mp.workdps(40):
        ex = [mp.exp(v) for v in vals]
        ratio = mp.mpf(ladder[0]) / mp.mpf(ladder[1])
        lvl = ex
        for p in range(1, len(ex)):
            w = ratio**p
            lvl = [(w * lvl[i + 1] - lvl[i]) / (w - 1) for i in range(len(lvl) - 1)]
        log_val = mp.log(lvl[0])
    return _make_value(float(log_val), n, "epsilon-extrapolation", ",".join(dps_used))


def rank_one_exact(theta: float, b, N: int | None = None, method: str = "analytic",
                   tolerance: float = 1e-5) -> HCIZValue:
    """``I_N^(2)(diag(theta, 0, ..., 0), B)`` for a simple spectrum ``b``.

    Equals ``(N-1)! exp(N theta .)[b_1, ..., b_N] / (N theta)^(N-1)``, a divided
    difference.  ``method="both"`` also runs the epsilon-extrapolated route
    and raises :class:`DisagreementError` if the two differ by more than
    ``tolerance`` (relative).
    """
    bs = DistinctSpectrum.of(b)
    n = len(bs) if N is None else int(N)
    if len(bs) != n:
        raise ShapeError("length of b must equal N")
    if n > MAX_N_RANK_ONE:
        raise ShapeError(f"N={n} exceeds the rank-one cap {MAX_N_RANK_ONE}")
    if method not in ("analytic", "extrapolated", "both"):
        raise DomainError(f"unknown method {method!r}")
    if method == "extrapolated":
        return rank_one_extrapolated(theta, bs.values, n)
    if theta == 0.0:
        res = _make_value(0.0, n, "divided-difference", "exact")
    elif n == 1:
        res = _make_value(theta * bs.values[0], 1, "divided-difference", "double")
    else:
        s = abs(n * theta)
        # cancellation ~ (max |b| s)^(N-1)/(N-1)! against 1/prod of gaps
        start = 30 + int(max(0.0, (_log_abs_vandermonde(bs.values) * -2.0 / n
                                   + (n - 1) * math.log(max(s, 1e-300)) * -1.0) / math.log(10.0)))
        log_val, dps = _rank_one_log_mp(theta, bs.values, n, start)
        res = _make_value(log_val, n, "divided-difference", f"mp{dps}")
    if method == "both":
        other = rank_one_extrapolated(theta, bs.values, n)
        rel = abs(math.expm1(other.log_value - res.log_value))
        if rel > tolerance:
            raise DisagreementError(f"rank-one routes differ by {rel:.3e} (relative)")
    return res


# ---------------------------------------------------------------------------
# Schur polynomials
# ---------------------------------------------------------------------------


def schur_dimension(mu) -> Fraction:
    """``S_mu(1, ..., 1)`` by the Weyl dimension product."""
    parts = Partition.of(mu).parts
    n = len(parts)
    out = Fraction(1)
    for i in range(n):
        for j in range(i + 1, n):
            out *= Fraction(parts[i] - parts[j] + j - i, j - i)
    return out


def _prepare_nodes(x, perturb: bool):
    xs = [float(v) for v in x]
    if any(v <= 0 for v in xs):
        raise DomainError("Schur arguments must be positive")
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    bumped = False
    for a, b in zip(order, order[1:]):
        if abs(xs[b] - xs[a]) <= 1e-7 * max(abs(xs[a]), abs(xs[b])):
            if not perturb:
                raise DegenerateInput("coincident Schur arguments")
            xs[b] = max(xs[b], xs[a]) * (1.0 + 1e-7)
            bumped = True
    if bumped:
        warnings.warn("coincident Schur arguments perturbed by relative 1e-7", RuntimeWarning)
    return xs


def schur_ratio(mu, x, perturb: bool = True, dps: int = 50) -> float:
    """Normalized Schur polynomial ``S_mu(x) / S_mu(1^N)`` via the bialternant."""
    parts = Partition.of(mu).parts
    n = len(parts)
    if len(x) != n:
        raise ShapeError("mu and x must have the same length")
    if n > 12:
        raise ShapeError("schur_ratio supports N <= 12")
    xs = _prepare_nodes(x, perturb)
    with mp.workdps(dps):
        xv = [mp.mpf(v) for v in xs]
        num = mp.matrix(n, n)
        den = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                num[i, j] = xv[i] ** (parts[j] + n - 1 - j)
                den[i, j] = xv[i] ** (n - 1 - j)
        s = mp.det(num) / mp.det(den)
        dim = schur_dimension(parts)
        return float(s * dim.denominator / dim.numerator)


def schur_hciz_identity(mu, a) -> tuple[float, float]:
    """Both sides of the Schur restatement of the determinant formula.

    ``B`` has the integer eigenvalues ``mu_j + N - j``; returns
    ``(hciz_exact value, normalized-Schur value)``.
    """
    parts = Partition.of(mu).parts
    n = len(parts)
    av = np.asarray(a, dtype=float)
    if av.size != n:
        raise ShapeError("mu and a must have the same length")
    b = np.array([parts[j] + n - 1 - j for j in range(n)], dtype=float)
    exact = hciz_exact(av, b, n, precision="extended").value
    xs = np.exp(n * av)
    ratio = schur_ratio(parts, xs)
    with mp.workdps(50):
        num = mp.mpf(1)
        den = mp.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                num *= mp.exp(n * mp.mpf(av[i])) - mp.exp(n * mp.mpf(av[j]))
                den *= n * (mp.mpf(av[i]) - mp.mpf(av[j]))
        schur_side = float(mp.mpf(ratio) * num / den)
    return exact, schur_side
