"""Monte Carlo estimators of the rank-one spherical integral.

Two estimators are provided:

* :func:`naive_log_i` averages ``exp(theta N sum_i lambda_i e_i^2)`` over
  uniform points ``e`` of the sphere and reports ``(1/N) log`` of the mean.
* :func:`tilted_estimate` draws Gaussians with per-coordinate variances
  ``1/(1 - 2 theta (lambda_i - v))`` so that the large exponential factor
  ``exp(N J)`` is removed analytically; what is left is a bounded-variance
  average whose mean is the prefactor ``m0 + m1/N + ...``.

Randomness is counter based: sample block ``k`` of an estimator draws from a
generator keyed by ``(seed, stream, k)``.  Blocks have a fixed size that does
not depend on the configuration, and block summaries are merged in a fixed
pairwise tree, so results are bit-identical for any work-chunk size or
thread count.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .spectra import Spectrum, ThetaWindow, solve_v, tilt_denominators

__all__ = [
    "McConfig",
    "McEstimate",
    "Summary",
    "GammaStats",
    "BLOCK",
    "naive_log_i",
    "tilted_estimate",
    "gamma_stats",
    "prefactor_from_naive",
    "sphere_points",
    "run_blocks",
    "log_mean_estimate",
]

BLOCK = 4096
REJECT_MARGIN = 1e-9
MAX_SEED = 2**64 - 1

# stream identifiers keep estimators on disjoint random streams
STREAM_NAIVE = 1
STREAM_TILTED = 2
STREAM_GAMMA = 3


def default_threads() -> int:
    env = os.environ.get("SPHERINT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SPHERINT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SPHERINT_THREADS must be >= 1")
        return n
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class McConfig:
    """Sampling configuration.

    ``batch`` is the number of samples handed to a worker at a time; it is
    rounded up to whole blocks of :data:`BLOCK` samples and never changes the
    random numbers drawn.
    """

    samples: int
    seed: int = 0
    batch: int = 65536
    threads: int | None = None
    jackknife: bool = False
    partials_path: str | None = None

    def __post_init__(self):
        for name in ("samples", "seed", "batch"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer")
        if self.samples < 100:
            raise ConfigError("samples must be >= 100")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.batch < 1:
            raise ConfigError("batch must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive")

    @property
    def workers(self) -> int:
        return self.threads if self.threads is not None else default_threads()


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    log_domain: bool
    seed: int
    rejected: int = 0
    jackknife_stderr: float | None = None

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "log_domain": self.log_domain,
            "seed": self.seed,
            "rejected": self.rejected,
            "jackknife_stderr": self.jackknife_stderr,
        }


# ---------------------------------------------------------------------------
# block engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Partial:
    """Count, log-shift, mean and centered sum of squares of ``exp(w - shift)``."""

    n: int
    shift: float
    mean: float
    m2: float
    rejected: int = 0


_EMPTY = _Partial(0, -math.inf, 0.0, 0.0, 0)


def _block_partial(logw: np.ndarray) -> _Partial:
    bad = ~np.isfinite(logw)
    rejected = int(np.count_nonzero(bad))
    w = logw[~bad] if rejected else logw
    if w.size == 0:
        return _Partial(0, -math.inf, 0.0, 0.0, rejected)
    shift = float(np.max(w))
    s = np.exp(w - shift)
    mean = float(np.mean(s))
    m2 = float(np.sum((s - mean) ** 2))
    return _Partial(int(w.size), shift, mean, m2, rejected)


def _merge(a: _Partial, b: _Partial) -> _Partial:
    rej = a.rejected + b.rejected
    if a.n == 0:
        return _Partial(b.n, b.shift, b.mean, b.m2, rej)
    if b.n == 0:
        return _Partial(a.n, a.shift, a.mean, a.m2, rej)
    shift = max(a.shift, b.shift)
    fa = math.exp(a.shift - shift)
    fb = math.exp(b.shift - shift)
    ma, mb = a.mean * fa, b.mean * fb
    n = a.n + b.n
    delta = mb - ma
    mean = ma + delta * b.n / n
    m2 = a.m2 * fa * fa + b.m2 * fb * fb + delta * delta * a.n * b.n / n
    return _Partial(n, shift, mean, m2, rej)


def _tree_reduce(parts: list) -> _Partial:
    level = list(parts)
    if not level:
        return _EMPTY
    while len(level) > 1:
        nxt = [_merge(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def _block_sizes(total: int) -> list:
    full, rem = divmod(total, BLOCK)
    return [BLOCK] * full + ([rem] if rem else [])


def run_blocks(sample_fn, cfg: McConfig, stream: int, reduce=_block_partial) -> list:
    """Apply ``reduce(sample_fn(rng, m))`` to every block, in block order.

    Work is dispatched in chunks of ``ceil(cfg.batch / BLOCK)`` blocks to a
    thread pool; since each block owns its generator the output does not
    depend on the chunking.
    """
    sizes = _block_sizes(cfg.samples)
    per_chunk = max(1, -(-cfg.batch // BLOCK))
    chunks = [range(i, min(i + per_chunk, len(sizes))) for i in range(0, len(sizes), per_chunk)]

    def work(chunk):
        return [reduce(sample_fn(_block_rng(cfg.seed, stream, k), sizes[k])) for k in chunk]

    workers = min(cfg.workers, len(chunks))
    if workers <= 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    return [p for chunk in results for p in chunk]


def _write_partials(path: str, parts: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["batch", "mean", "m2_accumulator", "n"])
        for k, p in enumerate(parts):
            if p.n == 0:
                writer.writerow([k, "nan", "nan", 0])
                continue
            scale = math.exp(p.shift)
            writer.writerow([k, repr(p.mean * scale), repr(p.m2 * scale * scale), p.n])


def _log_mean_and_se(p: _Partial) -> tuple[float, float]:
    """``log`` of the mean weight and its delta-method standard error."""
    if p.n == 0 or p.mean <= 0:
        raise DomainError("no accepted samples")
    var = p.m2 / (p.n - 1) if p.n > 1 else 0.0
    return math.log(p.mean) + p.shift, math.sqrt(var / p.n) / p.mean


def _jackknife(parts: list) -> float | None:
    """Delete-one-block jackknife standard error of the log mean."""
    g = len(parts)
    if g < 2:
        return None
    prefix = [_EMPTY]
    for p in parts:
        prefix.append(_merge(prefix[-1], p))
    suffix = [_EMPTY]
    for p in reversed(parts):
        suffix.append(_merge(p, suffix[-1]))
    suffix.reverse()
    vals = np.array([_log_mean_and_se(_merge(prefix[i], suffix[i + 1]))[0] for i in range(g)])
    return float(math.sqrt((g - 1) / g * np.sum((vals - vals.mean()) ** 2)))


def log_mean_estimate(sample_fn, cfg: McConfig, stream: int):
    """Run ``sample_fn`` (returning log-weights; non-finite means rejected) over all blocks.

    Returns ``(log_mean, stderr_of_log_mean, total, jackknife_stderr)``.
    """
    parts = run_blocks(sample_fn, cfg, stream)
    if cfg.partials_path:
        _write_partials(cfg.partials_path, parts)
    total = _tree_reduce(parts)
    lm, se = _log_mean_and_se(total)
    jk = _jackknife(parts) if cfg.jackknife else None
    return lm, se, total, jk


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def sphere_points(rng: np.random.Generator, m: int, dim: int) -> np.ndarray:
    """``m`` uniform points on the unit sphere of R^dim (normalized Gaussians)."""
    g = rng.standard_normal((m, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _check_length(spec: Spectrum, N: int) -> None:
    if spec.n != int(N):
        raise ShapeError(f"spectrum has {spec.n} eigenvalues, expected N={N}")


def _real_twin(spec: Spectrum, theta: float):
    if spec.beta == 2:
        return spec.doubled(), 0.5 * theta
    return spec, theta


def naive_log_i(spec: Spectrum, theta: float, N: int, cfg: McConfig) -> McEstimate:
    """Direct estimate of ``(1/N) log I_N(theta, B)`` from uniform sphere points.

    The exponent is centered on the median eigenvalue ``c`` (weights
    ``exp(theta N sum (lambda_i - c) e_i^2)``), which makes a constant
    spectrum exact; the complex case samples the real 2N-sphere with the
    doubled spectrum.
    """
    _check_length(spec, N)
    theta = float(theta.theta if isinstance(theta, ThetaWindow) else theta)
    twin, _ = _real_twin(spec, theta)
    lam = twin.eigenvalues
    c = float(lam[(lam.size - 1) // 2])
    centered = lam - c
    coef = theta * N

    def sample(rng, m):
        e = sphere_points(rng, m, lam.size)
        return coef * ((e * e) @ centered)

    lm, se, total, jk = log_mean_estimate(sample, cfg, STREAM_NAIVE)
    return McEstimate(
        mean=theta * c + lm / N,
        stderr=se / N,
        n=total.n,
        log_domain=True,
        seed=cfg.seed,
        rejected=total.rejected,
        jackknife_stderr=None if jk is None else jk / N,
    )


def _tilted_log_weights(lam, d, v, theta_eff):
    dim = lam.size
    inv_d = 1.0 / d
    shifted = lam - v

    def sample(rng, m):
        g2 = rng.standard_normal((m, dim)) ** 2 * inv_d
        gamma = g2.sum(axis=1) / dim - 1.0
        x = (g2 @ shifted) / dim
        logw = -theta_eff * dim * gamma * x / (gamma + 1.0)
        logw[gamma <= -1.0 + REJECT_MARGIN] = np.nan
        return logw

    return sample


def _tilt(spec: Spectrum, window, N: int):
    _check_length(spec, N)
    theta = window.theta if isinstance(window, ThetaWindow) else float(window)
    twin, theta_eff = _real_twin(spec, theta)
    v = solve_v(twin, theta_eff).v
    d = tilt_denominators(twin, theta_eff, v)
    return twin, theta_eff, v, d


def tilted_estimate(spec: Spectrum, window, N: int, cfg: McConfig) -> McEstimate:
    """Estimate of ``exp(-N J) I_N(theta, B)`` under the Gaussian change of measure.

    The returned mean is the prefactor itself (not a log); it tends to
    ``m0 + m1/N`` and is exactly 1 for a constant spectrum.
    """
    twin, theta_eff, v, d = _tilt(spec, window, N)
    sample = _tilted_log_weights(twin.eigenvalues, d, v, theta_eff)
    lm, se, total, jk = log_mean_estimate(sample, cfg, STREAM_TILTED)
    mean = math.exp(lm)
    return McEstimate(
        mean=mean,
        stderr=mean * se,
        n=total.n,
        log_domain=False,
        seed=cfg.seed,
        rejected=total.rejected,
        jackknife_stderr=None if jk is None else mean * jk,
    )


def prefactor_from_naive(est: McEstimate, J: float, N: int) -> tuple[float, float]:
    """Naive estimate re-expressed as the prefactor ``exp(-N J) I_N`` and its stderr."""
    value = math.exp(N * (est.mean - J))
    return value, value * N * est.stderr


# ---------------------------------------------------------------------------
# concentration diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    stderr: float
    q05: float
    q50: float
    q95: float
    n: int

    @classmethod
    def of(cls, x: np.ndarray) -> "Summary":
        x = np.asarray(x, dtype=float)
        std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        q = np.quantile(x, [0.05, 0.5, 0.95])
        return cls(float(np.mean(x)), std, std / math.sqrt(x.size), float(q[0]), float(q[1]),
                   float(q[2]), int(x.size))


@dataclass(frozen=True)
class GammaStats:
    gamma: Summary
    gamma_hat: Summary
    exceed_k1: float
    exceed_k2: float
    kappa1: float
    kappa2: float
    kappas_valid: bool = True
    extra: dict = field(default_factory=dict)


def kappas_valid(kappa1: float, kappa2: float) -> bool:
    return 0.5 > kappa1 > 2.0 * kappa2 and 2.0 * kappa1 + kappa2 > 1.0


def gamma_stats(spec: Spectrum, window, N: int, kappa1: float = 0.45, kappa2: float = 0.15,
                cfg: McConfig | None = None) -> GammaStats:
    """Distribution of ``gamma = |g|^2/N - 1`` and ``gamma_hat = <lambda g, g>/N - v`` under the tilt."""
    if cfg is None:
        raise ConfigError("a McConfig is required")
    ok = kappas_valid(kappa1, kappa2)
    if not ok:
        warnings.warn(
            f"kappa1={kappa1}, kappa2={kappa2} violate 1/2 > k1 > 2 k2 and 2 k1 + k2 > 1",
            RuntimeWarning,
        )
    twin, theta_eff, v, d = _tilt(spec, window, N)
    lam = twin.eigenvalues
    dim = lam.size
    inv_d = 1.0 / d

    def sample(rng, m):
        g2 = rng.standard_normal((m, dim)) ** 2 * inv_d
        gam = g2.sum(axis=1) / dim - 1.0
        gam_hat = (g2 @ lam) / dim - v
        return gam, gam_hat

    parts = run_blocks(sample, cfg, STREAM_GAMMA, reduce=lambda x: x)
    gam = np.concatenate([p[0] for p in parts])
    gam_hat = np.concatenate([p[1] for p in parts])
    t1 = float(dim) ** (-kappa1)
    t2 = float(dim) ** (-kappa2)
    return GammaStats(
        gamma=Summary.of(gam),
        gamma_hat=Summary.of(gam_hat),
        exceed_k1=float(np.mean(np.abs(gam) > t1)),
        exceed_k2=float(np.mean(np.abs(gam_hat) > t2)),
        kappa1=kappa1,
        kappa2=kappa2,
        kappas_valid=ok,
        extra={"v": v, "dimension": dim},
    )
