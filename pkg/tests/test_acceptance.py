"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import functools
import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from oracles import all_partitions, schur_by_tableaux
from spherint.expansion import appendix_check, coefficients, k_matrix, log_i_approx
from spherint.freeness import WignerConfig, additivity_check, freeness_experiment, laplace_bound_check
from spherint.gaussmoments import ComplexQuadraticForm, Poly2, gaussian_moment, gaussian_norm, quadrature_moment
from spherint.hciz import hciz_exact, rank_one_exact, schur_hciz_identity, schur_ratio
from spherint.montecarlo import McConfig, naive_log_i, tilted_estimate
from spherint.spectra import Spectrum, a_coeff, f_g, fg_identities, r_integral, r_integral_quadrature, solve_v

THETAS = (0.02, -0.02, 0.05, -0.05)
PARALLEL = 4


def corpus():
    """100 spectra, 25 each of N = 2, 4, 16, 64, entries uniform on [-1, 1]."""
    rng = np.random.default_rng(20240601)
    return [Spectrum(rng.uniform(-1, 1, n)) for n in (2, 4, 16, 64) for _ in range(25)]


def gate(number, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        within = elapsed <= limit
        detail = f"{detail}; {elapsed:.1f}s (limit {limit:.0f}s)"
        ok = ok and within
    record_criterion(number, ok, detail)
    assert ok, detail


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# Monte Carlo pieces, cached so the reproducibility criterion can rerun them serially
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def mc_tilted_64(threads, batch):
    s = Spectrum(np.tile([-1.0, 1.0], 32))
    return tilted_estimate(s, 0.1, 64, McConfig(10**6, seed=5, threads=threads, batch=batch))


def oracle_triangle_spectrum():
    return np.sort(np.random.default_rng(6).uniform(-1, 1, 8))


@functools.lru_cache(maxsize=None)
def mc_naive_8(threads, batch):
    s = Spectrum(oracle_triangle_spectrum(), beta=2)
    return naive_log_i(s, 0.1, 8, McConfig(10**6, seed=6, threads=threads, batch=batch))


@functools.lru_cache(maxsize=None)
def mc_additivity(threads, batch):
    b = np.tile([-1.0, 1.0], 4)
    return additivity_check(b, b, 0.1, McConfig(10**6, seed=9, threads=threads, batch=batch))


@functools.lru_cache(maxsize=None)
def mc_freeness(threads, batch):
    return freeness_experiment(
        Spectrum([-1.0, 1.0]), WignerConfig(32, "gaussian", seed=10), 0.1, [32, 128, 512],
        McConfig(20_000, seed=10, threads=threads, batch=batch), repeats=6,
    )


# ---------------------------------------------------------------------------


def test_criterion_01_identity_suite():
    start = time.perf_counter()
    worst = dict(a1=0.0, fg=0.0, det=0.0, rint=0.0)
    for s in corpus():
        for theta in THETAS:
            tp = solve_v(s, theta)
            a2 = a_coeff(s, theta, tp)
            f, g = f_g(s, theta, tp)
            f2, g2 = fg_identities(theta, tp.v, a2)
            worst["a1"] = max(worst["a1"], abs(a_coeff(s, theta, tp, k=1) - 1.0))
            worst["fg"] = max(worst["fg"], abs(f - f2), abs(g - g2))
            worst["det"] = max(worst["det"], abs(k_matrix(s, theta).det - a2))
            worst["rint"] = max(worst["rint"], abs(r_integral(s, theta, tp) - r_integral_quadrature(s, theta)))
    elapsed = time.perf_counter() - start
    ok = worst["a1"] <= 1e-12 and worst["fg"] <= 1e-10 and worst["det"] <= 1e-10 and worst["rint"] <= 1e-8
    gate(1, ok, "max |A1-1|={a1:.1e} F/G={fg:.1e} detK={det:.1e} Rint={rint:.1e}".format(**worst), elapsed, 10)


def test_criterion_02_appendix_m1():
    start = time.perf_counter()
    worst_m1 = worst_wick = 0.0
    for s in corpus():
        for theta in THETAS:
            rep = appendix_check(s, theta)
            worst_m1 = max(worst_m1, abs(rep.combined - rep.m1), abs(rep.m1 - coefficients(s, theta).m1))
            worst_wick = max(worst_wick, abs(rep.wick_f2_coef - rep.f2_coef), abs(rep.wick_f1_coef - rep.f1_coef))
    elapsed = time.perf_counter() - start
    ok = worst_m1 <= 1e-10 and worst_wick <= 1e-8
    gate(2, ok, f"max |combined-m1|={worst_m1:.1e} max |wick-closed|={worst_wick:.1e}", elapsed, 30)


def test_criterion_03_wick_vs_quadrature():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        l = rng.normal(size=(2, 2))
        im = rng.normal(scale=0.5, size=(2, 2))
        k = ComplexQuadraticForm(l @ l.T + 0.3 * np.eye(2) + 0.5j * (im + im.T))
        worst = max(worst, rel(gaussian_norm(k), quadrature_moment(k)))
        for a in range(7):
            for b in range(7 - a):
                if (a + b) % 2:
                    continue
                p = Poly2.monomial(a, b, complex(*rng.normal(size=2)))
                worst = max(worst, rel(gaussian_moment(k, p), quadrature_moment(k, p)))
        poly = Poly2({(i, j): complex(*rng.normal(size=2)) for i in range(4) for j in range(3)})
        worst = max(worst, rel(gaussian_moment(k, poly), quadrature_moment(k, poly)))
    elapsed = time.perf_counter() - start
    gate(3, worst <= 1e-6, f"max relative Wick-quadrature gap {worst:.1e} over 50 forms", elapsed, 60)


def test_criterion_04_expansion_rate():
    start = time.perf_counter()
    eps = {}
    for n in (6, 12, 24):
        b = np.linspace(-1, 1, n)
        c = coefficients(Spectrum(b, beta=2), 0.05)
        exact = rank_one_exact(0.05, b, method="both", tolerance=1e-6)
        eps[n] = abs(math.exp(exact.log_value - n * c.J) - (c.m0 + c.m1 / n))
    r1, r2 = eps[6] / eps[12], eps[12] / eps[24]
    elapsed = time.perf_counter() - start
    ok = 2.5 <= r1 <= 6 and 2.5 <= r2 <= 6
    detail = f"eps_6={eps[6]:.2e} eps_12={eps[12]:.2e} eps_24={eps[24]:.2e} ratios {r1:.2f}, {r2:.2f}"
    gate(4, ok, detail, elapsed, 60)


def test_criterion_05_tilted_mc():
    start = time.perf_counter()
    s = Spectrum(np.tile([-1.0, 1.0], 32))
    c = coefficients(s, 0.1)
    target = c.m0 + c.m1 / 64
    est = mc_tilted_64(PARALLEL, 65536)
    const = tilted_estimate(Spectrum.constant(0.4, 64), 0.1, 64, McConfig(10**6, seed=5))
    elapsed = time.perf_counter() - start
    z = (est.mean - target) / est.stderr
    ok = abs(z) <= 3 and est.stderr <= 2e-3 and const.mean == 1.0 and const.stderr == 0.0
    gate(5, ok, f"mean={est.mean:.6f} target={target:.6f} z={z:+.2f} stderr={est.stderr:.1e}; constant -> "
                f"{const.mean} +- {const.stderr}", elapsed, 60)


def test_criterion_06_oracle_triangle():
    start = time.perf_counter()
    b = oracle_triangle_spectrum()
    exact = rank_one_exact(0.1, b).log_value
    est = mc_naive_8(PARALLEL, 65536)
    approx = log_i_approx(Spectrum(b, beta=2), 0.1, 8, order=1)
    elapsed = time.perf_counter() - start
    z = (est.mean - exact / 8) / est.stderr
    gap = abs(approx - exact) / 8
    ok = abs(z) <= 3 and gap <= 0.002
    gate(6, ok, f"exact={exact / 8:.6f} mc z={z:+.2f} |approx-exact|/N={gap:.1e}", elapsed, 120)


def test_criterion_07_hciz_properties():
    rng = np.random.default_rng(7)
    worst_sym = worst_shift = worst_paths = 0.0
    for n in (2, 4, 8, 12):
        a, b = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        base = hciz_exact(a, b)
        worst_sym = max(worst_sym, abs(math.expm1(hciz_exact(b, a).log_value - base.log_value)))
        c = rng.uniform(-1, 1)
        shifted = hciz_exact(a, b + c).log_value
        worst_shift = max(worst_shift, abs(math.expm1(shifted - base.log_value - n * c * a.sum())))
        theta = rng.uniform(0.02, 0.2)
        r = rank_one_exact(theta, b).log_value
        rs = rank_one_exact(theta, b + c).log_value
        worst_shift = max(worst_shift, abs(math.expm1(rs - r - n * theta * c)))
        x = rank_one_exact(theta, b, method="extrapolated").log_value
        worst_paths = max(worst_paths, abs(math.expm1(x - r)))
    ok = worst_sym <= 1e-10 and worst_shift <= 1e-10 and worst_paths <= 1e-6
    gate(7, ok, f"symmetry {worst_sym:.1e} shift {worst_shift:.1e} analytic-vs-epsilon {worst_paths:.1e}")


def test_criterion_08_schur_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_id = worst_tab = 0.0
    cases = 0
    for n in (2, 3, 4):
        for mu in all_partitions(n, 4):
            a = rng.uniform(-0.5, 0.5, n)
            exact, schur_side = schur_hciz_identity(mu, a)
            worst_id = max(worst_id, rel(schur_side, exact))
            x = rng.uniform(0.1, 2.0, n)
            brute = schur_by_tableaux(mu, x) / schur_by_tableaux(mu, [1.0] * n)
            worst_tab = max(worst_tab, rel(schur_ratio(mu, x), brute))
            cases += 1
    elapsed = time.perf_counter() - start
    ok = worst_id <= 1e-8 and worst_tab <= 1e-10
    gate(8, ok, f"{cases} partitions: identity {worst_id:.1e} bialternant-vs-tableaux {worst_tab:.1e}", elapsed, 60)


def test_criterion_09_exact_additivity():
    start = time.perf_counter()
    rep = mc_additivity(PARALLEL, 65536)
    elapsed = time.perf_counter() - start
    row = rep.rows[0]
    ok = abs(row.gap) <= 3 * row.stderr
    gate(9, ok, f"gap={row.gap:+.2e} stderr={row.stderr:.1e} ({row.gap / row.stderr:+.2f} sigma)", elapsed, 120)


def test_criterion_10_freeness():
    start = time.perf_counter()
    rep = mc_freeness(PARALLEL, 65536)
    elapsed = time.perf_counter() - start
    w512 = rep.extra["wigner_term"][-1]
    gaps = ", ".join(f"N={r.N}: {r.gap:+.1e}+-{r.stderr:.0e}" for r in rep.rows)
    trend = rep.extra["trend_ok"]
    ok = rep.verdict and trend and abs(rep.rows[-1].gap) <= 0.01 and abs(w512["value"] - 0.01) <= 0.003
    gate(10, ok, f"{gaps}; trend {'ok' if trend else 'broken'}; (1/N)log I(X_512)={w512['value']:.5f}", elapsed, 600)


def test_criterion_11_laplace_bounds():
    gauss = laplace_bound_check("gaussian", 0.0)
    coarse = laplace_bound_check("rademacher", 0.0, points=101)
    c = coarse.minimal_c
    fine_at_c = laplace_bound_check("rademacher", c, points=1001)
    coarse_at_c = laplace_bound_check("rademacher", c, points=101)
    below = laplace_bound_check("rademacher", 0.99 * c, points=1001)
    ok = (gauss.verdict and coarse_at_c.verdict and fine_at_c.verdict and not below.verdict
          and abs(c - 0.067) <= 1e-3 and abs(fine_at_c.minimal_c - c) <= 1e-15
          and abs(c - (0.5 - math.log(math.cosh(1.0)))) <= 1e-15)
    gate(11, ok, f"gaussian c=0 {'pass' if gauss.verdict else 'fail'}; rademacher minimal c={c:.6f} "
                 f"at t={coarse.worst_t:+.0f}, verdict stable 101->1001")


def test_criterion_12_reproducibility():
    pairs = {
        "tilted N=64": (mc_tilted_64(PARALLEL, 65536), mc_tilted_64(1, 4096)),
        "naive N=8": (mc_naive_8(PARALLEL, 65536), mc_naive_8(1, 4096)),
        "additivity": (mc_additivity(PARALLEL, 65536).to_dict(), mc_additivity(1, 4096).to_dict()),
        "freeness": (mc_freeness(PARALLEL, 65536).to_dict(), mc_freeness(1, 4096).to_dict()),
    }
    same = {k: a == b for k, (a, b) in pairs.items()}
    ok = all(same.values())
    gate(12, ok, "serial vs parallel bit-identical: " + ", ".join(f"{k} {'yes' if v else 'NO'}" for k, v in same.items()))
