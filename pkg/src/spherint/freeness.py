"""Wigner and Haar samplers and additivity experiments for the rank-one integral.

``(1/N) log I_N(theta, .)`` is additive under free convolution in the
large-N limit.  At finite N it is exactly additive in expectation over a Haar
rotation (:func:`additivity_check`), and approximately additive for a
deterministic matrix plus an independent Wigner matrix
(:func:`freeness_experiment`).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, UnknownLaw
from .montecarlo import McConfig, log_mean_estimate, naive_log_i, run_blocks, sphere_points, tilted_estimate
from .spectra import Spectrum, r_integral

__all__ = [
    "LAWS",
    "WignerConfig",
    "ExperimentRow",
    "ExperimentReport",
    "sample_wigner",
    "sample_haar_orthogonal",
    "haar_orthogonal_batch",
    "resize_spectrum",
    "additivity_check",
    "freeness_experiment",
    "laplace_bound_check",
    "LaplaceReport",
    "sphere_max_check",
    "SphereMaxReport",
]

LAWS = ("gaussian", "rademacher", "uniform")
THETA_LIMIT = 0.2

STREAM_ADDITIVITY = 20
STREAM_SPHERE_MAX = 30
STREAM_EXPERIMENT = 40


def _derived_seed(seed: int, *key: int) -> int:
    words = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


@dataclass(frozen=True)
class WignerConfig:
    N: int
    law: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if int(self.N) < 1:
            raise ConfigError("N must be positive")
        if self.law not in LAWS:
            raise UnknownLaw(f"unknown entry law {self.law!r}; choose from {LAWS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def _draw_law(rng: np.random.Generator, law: str, size) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(size)
    if law == "rademacher":
        return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
    if law == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=size)
    raise UnknownLaw(f"unknown entry law {law!r}")


def sample_wigner(cfg: WignerConfig) -> np.ndarray:
    """Symmetric matrix whose entries on and above the diagonal are iid ``law / sqrt(N)``."""
    n = int(cfg.N)
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(n,)))
    upper = np.triu(_draw_law(rng, cfg.law, (n, n)) / math.sqrt(n))
    return upper + np.triu(upper, 1).T


def haar_orthogonal_batch(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """``m`` independent Haar orthogonal ``n x n`` matrices (QR with sign-fixed R diagonal)."""
    q, r = np.linalg.qr(rng.standard_normal((m, n, n)))
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def sample_haar_orthogonal(N: int, seed: int) -> np.ndarray:
    if int(N) < 1:
        raise ConfigError("N must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(N),)))
    return haar_orthogonal_batch(rng, 1, int(N))[0]


def resize_spectrum(spec: Spectrum, n: int) -> Spectrum:
    """``n`` midpoint quantiles of the empirical distribution of ``spec``."""
    lam = spec.eigenvalues
    idx = np.floor((np.arange(n) + 0.5) / n * lam.size).astype(int)
    return Spectrum(lam[np.minimum(idx, lam.size - 1)], beta=spec.beta)


def _eigen(x) -> np.ndarray:
    if isinstance(x, Spectrum):
        return x.eigenvalues
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return np.sort(arr)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        if not np.allclose(arr, arr.T, atol=1e-12):
            raise ShapeError("matrix must be symmetric")
        return np.linalg.eigvalsh(arr)
    raise ShapeError("expected a spectrum, a vector or a square symmetric matrix")


@dataclass(frozen=True)
class ExperimentRow:
    N: int
    lhs: float
    rhs_sum: float
    gap: float
    stderr: float


@dataclass
class ExperimentReport:
    theta: float
    rows: list
    verdict: bool
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "rows": [asdict(r) for r in self.rows],
            "verdict": self.verdict,
            "notes": self.notes,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["N", "lhs", "rhs", "gap", "stderr"])
        for r in self.rows:
            writer.writerow([r.N, repr(r.lhs), repr(r.rhs_sum), repr(r.gap), repr(r.stderr)])
        return buf.getvalue()


def additivity_check(b, b_tilde, theta: float, cfg: McConfig, mode: str = "single",
                     inner: int = 64) -> ExperimentReport:
    """Monte Carlo check of ``E_V I(theta, B + V^T B~ V) = I(theta, B) I(theta, B~)``.

    ``mode="single"`` samples independent pairs ``(e, V)``; ``mode="double"``
    averages ``inner`` sphere points per rotation (``cfg.samples`` rotations).
    Both sides are reported as ``(1/N) log``.
    """
    lb, lt = _eigen(b), _eigen(b_tilde)
    if lb.size != lt.size:
        raise ShapeError("B and B~ must have the same dimension")
    if mode not in ("single", "double"):
        raise ConfigError(f"unknown mode {mode!r}")
    n = lb.size
    theta = float(theta)
    cb, ct = float(lb[(n - 1) // 2]), float(lt[(n - 1) // 2])
    db, dt = lb - cb, lt - ct
    coef = theta * n

    def exponents(rng, m):
        e = sphere_points(rng, m, n)
        f = np.einsum("kij,kj->ki", haar_orthogonal_batch(rng, m, n), e)
        return coef * ((e * e) @ db + (f * f) @ dt)

    if mode == "single":
        sample = exponents
    else:
        def sample(rng, m):
            w = exponents(rng, m * inner).reshape(m, inner)
            top = w.max(axis=1)
            return top + np.log(np.mean(np.exp(w - top[:, None]), axis=1))

    lm, se, total, _ = log_mean_estimate(sample, cfg, STREAM_ADDITIVITY)
    lhs = theta * (cb + ct) + lm / n
    lhs_se = se / n
    est_b = naive_log_i(Spectrum(lb), theta, n, replace(cfg, seed=_derived_seed(cfg.seed, 1), partials_path=None))
    est_t = naive_log_i(Spectrum(lt), theta, n, replace(cfg, seed=_derived_seed(cfg.seed, 2), partials_path=None))
    rhs = est_b.mean + est_t.mean
    stderr = math.sqrt(lhs_se**2 + est_b.stderr**2 + est_t.stderr**2)
    gap = lhs - rhs
    row = ExperimentRow(N=n, lhs=lhs, rhs_sum=rhs, gap=gap, stderr=stderr)
    return ExperimentReport(
        theta=theta,
        rows=[row],
        verdict=bool(abs(gap) <= 3.0 * stderr),
        notes=f"{mode} Monte Carlo over (e, V); verdict is |gap| <= 3 stderr",
        extra={"mode": mode, "samples": total.n, "rejected": total.rejected},
    )


def _tilted_log_i(lam: np.ndarray, theta: float, cfg: McConfig) -> tuple[float, float]:
    """``(1/N) log I_N`` as ``J + log(prefactor)/N`` with the tilted estimator."""
    spec = Spectrum(lam)
    n = spec.n
    if spec.is_constant or theta == 0.0:
        return theta * float(lam[0]) if spec.is_constant else 0.0, 0.0
    est = tilted_estimate(spec, theta, n, cfg)
    return r_integral(spec, theta) + math.log(est.mean) / n, est.stderr / (est.mean * n)


def freeness_experiment(a_spec: Spectrum, wigner: WignerConfig, theta: float, Ns,
                        cfg: McConfig, repeats: int = 4, theta_limit: float = THETA_LIMIT,
                        final_tolerance: float = 0.01) -> ExperimentReport:
    """Gap between ``(1/N) log I(theta, A_N + X_N)`` and the sum of the separate terms.

    ``A_N`` takes the N midpoint quantiles of ``a_spec``; ``X_N`` is a fresh
    Wigner matrix per ``(N, repeat)``.  Rows average over repeats and carry
    the between-repeat standard error.  The verdict asks for gap magnitudes
    that do not grow beyond a 2-stderr band and a final ``|gap|`` within
    ``final_tolerance``.
    """
    theta = float(theta)
    if abs(theta) > theta_limit:
        raise DomainError(f"|theta| = {abs(theta)} exceeds the small-theta limit {theta_limit}")
    Ns = [int(n) for n in Ns]
    if not Ns or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ShapeError("Ns must be a nonempty increasing list")
    if repeats < 1:
        raise ConfigError("repeats must be positive")
    rows = []
    wigner_terms = []
    for n in Ns:
        a_n = resize_spectrum(a_spec.with_beta(1), n).eigenvalues
        lhs_r, rhs_r, x_r = [], [], []
        for r in range(repeats):
            x = sample_wigner(WignerConfig(n, wigner.law, _derived_seed(wigner.seed, n, r)))
            sub = lambda k: replace(cfg, seed=_derived_seed(cfg.seed, STREAM_EXPERIMENT, n, r, k), partials_path=None)
            lhs, _ = _tilted_log_i(np.linalg.eigvalsh(np.diag(a_n) + x), theta, sub(0))
            term_a, _ = _tilted_log_i(a_n, theta, sub(1))
            term_x, _ = _tilted_log_i(np.linalg.eigvalsh(x), theta, sub(2))
            lhs_r.append(lhs)
            rhs_r.append(term_a + term_x)
            x_r.append(term_x)
        gaps = np.array(lhs_r) - np.array(rhs_r)
        se = float(np.std(gaps, ddof=1) / math.sqrt(repeats)) if repeats > 1 else 0.0
        rows.append(ExperimentRow(N=n, lhs=float(np.mean(lhs_r)), rhs_sum=float(np.mean(rhs_r)),
                                  gap=float(np.mean(gaps)), stderr=se))
        xs = np.array(x_r)
        wigner_terms.append({
            "N": n,
            "value": float(xs.mean()),
            "stderr": float(xs.std(ddof=1) / math.sqrt(repeats)) if repeats > 1 else 0.0,
            "semicircle": theta * theta,
        })
    trend_ok = all(
        abs(b.gap) <= abs(a.gap) + 2.0 * math.hypot(a.stderr, b.stderr) for a, b in zip(rows, rows[1:])
    )
    final_ok = abs(rows[-1].gap) <= final_tolerance
    return ExperimentReport(
        theta=theta,
        rows=rows,
        verdict=bool(trend_ok and final_ok),
        notes=f"{wigner.law} Wigner, {repeats} repeats per N; trend within 2-stderr bands",
        extra={"trend_ok": trend_ok, "final_ok": final_ok, "wigner_term": wigner_terms},
    )


# ---------------------------------------------------------------------------
# Laplace-transform bounds and sphere concentration
# ---------------------------------------------------------------------------


def _log_mgf(law: str, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if law == "gaussian":
        return 0.5 * t * t
    if law == "rademacher":
        return np.log(np.cosh(t))
    if law == "uniform":
        x = math.sqrt(3.0) * np.abs(t)
        safe = np.where(x == 0, 1.0, x)
        return np.where(x == 0, 0.0, np.log(np.sinh(safe) / safe))
    raise UnknownLaw(f"unknown entry law {law!r}")


@dataclass(frozen=True)
class LaplaceReport:
    law: str
    c: float
    verdict: bool
    minimal_c: float
    worst_t: float
    grid_size: int

    def to_dict(self) -> dict:
        return asdict(self)


def laplace_bound_check(law: str, c: float, grid=None, points: int = 101) -> LaplaceReport:
    """Check ``t^2/2 - c|t|^3 <= log E exp(tX) <= t^2/2 + c|t|^3`` on a grid in [-1, 1].

    Also returns the smallest ``c`` for which both bounds hold on the grid.
    """
    if law not in LAWS:
        raise UnknownLaw(f"unknown entry law {law!r}")
    t = np.linspace(-1.0, 1.0, points) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("grid must lie in [-1, 1]")
    dev = np.abs(_log_mgf(law, t) - 0.5 * t * t)
    cube = np.abs(t) ** 3
    nz = cube > 0
    ratios = np.zeros_like(t)
    ratios[nz] = dev[nz] / cube[nz]
    k = int(np.argmax(ratios))
    minimal = float(ratios[k])
    verdict = bool(np.all(dev <= c * cube + 1e-15))
    return LaplaceReport(law=law, c=float(c), verdict=verdict, minimal_c=minimal,
                         worst_t=float(t[k]), grid_size=int(t.size))


@dataclass(frozen=True)
class SphereMaxReport:
    N: int
    epsilon: float
    threshold: float
    rate: float
    count: int
    samples: int
    c: float
    bound: float
    verdict: bool
    vacuous: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _exceed_rate(n: int, threshold: float, cfg: McConfig) -> tuple[int, int]:
    def sample(rng, m):
        e = sphere_points(rng, m, n)
        return np.abs(e).max(axis=1) > threshold

    parts = run_blocks(sample, cfg, STREAM_SPHERE_MAX + n, reduce=lambda x: int(np.count_nonzero(x)))
    return int(sum(parts)), cfg.samples


def sphere_max_check(N: int, epsilon: float, cfg: McConfig, c: float | None = None,
                     reference_N: int = 256) -> SphereMaxReport:
    """Exceedance rate of ``max_i |e_i| > N^(-1/2 + epsilon)`` against ``N exp(-c N^(2 epsilon))``.

    Without an explicit ``c`` it is fitted at ``reference_N`` as the largest
    constant consistent with the observed rate there (a rule-of-three upper
    rate is used when nothing exceeds).
    """
    if not 0.0 < epsilon < 0.5:
        raise DomainError("epsilon must lie in (0, 1/2)")
    N = int(N)
    threshold = N ** (-0.5 + epsilon)
    count, total = _exceed_rate(N, threshold, cfg)
    rate = count / total
    if c is None:
        ref_thr = reference_N ** (-0.5 + epsilon)
        ref_count, ref_total = (count, total) if reference_N == N else _exceed_rate(reference_N, ref_thr, cfg)
        upper = max(ref_count, 3.0) / ref_total
        c = math.log(reference_N / upper) / reference_N ** (2.0 * epsilon)
    bound = N * math.exp(-c * N ** (2.0 * epsilon))
    return SphereMaxReport(N=N, epsilon=float(epsilon), threshold=threshold, rate=rate, count=count,
                           samples=total, c=float(c), bound=bound, verdict=bool(rate <= bound * (1.0 + 1e-9)),
                           vacuous=bool(bound >= 1.0))
