import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import tilt_point_mp
from spherint.errors import ConvergenceError, DomainError
from spherint.spectra import (
    Spectrum,
    ThetaWindow,
    a_coeff,
    admissible_bound,
    f_g,
    fg_identities,
    hilbert,
    r_integral,
    r_integral_quadrature,
    r_transform,
    solve_v,
    solve_v_many,
    tilt_denominators,
)

# {-1, +1} at theta = 0.1, from a 50-digit mpmath root of the tilt equation
PM_V = 0.19258240356725202
PM_A2 = 1.0370879821637399

spectra_st = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=24)
theta_st = st.sampled_from([-0.05, -0.02, -0.001, 0.001, 0.02, 0.05])


def test_spectrum_sorted_and_readonly():
    s = Spectrum([0.5, -1.0, 0.2])
    assert list(s.eigenvalues) == [-1.0, 0.2, 0.5]
    with pytest.raises(ValueError):
        s.eigenvalues[0] = 3.0


@pytest.mark.parametrize("bad", [[], [np.nan], [np.inf, 1.0]])
def test_spectrum_rejects_bad_input(bad):
    with pytest.raises(DomainError):
        Spectrum(bad)


def test_spectrum_rejects_beta():
    with pytest.raises(DomainError):
        Spectrum([1.0], beta=4)


def test_text_round_trip_keeps_beta():
    s = Spectrum([-0.25, 1.5, 3.0], beta=2)
    back = Spectrum.from_text(s.to_text())
    assert back.beta == 2
    assert np.array_equal(back.eigenvalues, s.eigenvalues)


def test_from_text_reports_line():
    with pytest.raises(DomainError, match="line 2"):
        Spectrum.from_text("1.0\nabc\n")


def test_from_file(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# beta=2\n1\n-1\n\n")
    s = Spectrum.from_file(p)
    assert s.beta == 2 and s.n == 2


def test_doubled_repeats_eigenvalues():
    s = Spectrum([-1.0, 2.0], beta=2)
    assert list(s.doubled().eigenvalues) == [-1.0, -1.0, 2.0, 2.0]


def test_admissible_bound_value():
    assert admissible_bound(1.0) == pytest.approx(1 / 15)
    w = ThetaWindow.for_spectrum(Spectrum([-1.0, 1.0]), 0.05)
    assert w.admissible
    assert not ThetaWindow.for_spectrum(Spectrum([-1.0, 1.0]), 0.1).admissible
    assert ThetaWindow.for_spectrum(Spectrum([-1.0, 1.0]), 0.1, bound=0.2).admissible


def test_tilt_point_two_point_spectrum():
    tp = solve_v(Spectrum([-1.0, 1.0]), 0.1)
    assert tp.v == pytest.approx(PM_V, abs=1e-14)
    assert a_coeff(Spectrum([-1.0, 1.0]), 0.1, tp) == pytest.approx(PM_A2, abs=1e-13)


def test_tilt_point_constant_is_exact():
    s = Spectrum.constant(0.37, 9)
    for theta in (-0.2, 0.0, 0.05, 0.3):
        assert solve_v(s, theta).v == 0.37


def test_tilt_point_theta_zero_is_mean():
    s = Spectrum([-1.0, 0.0, 4.0])
    assert solve_v(s, 0.0).v == pytest.approx(1.0)


def test_tilt_point_reflection():
    s = Spectrum([-1.0, 0.1, 0.7, 0.8])
    assert solve_v(s, -0.04).v == pytest.approx(-solve_v(Spectrum(-s.eigenvalues), 0.04).v, abs=1e-15)


def test_tilt_point_matches_mpmath():
    rng = np.random.default_rng(11)
    for n in (2, 5, 16):
        lam = rng.uniform(-1, 1, n)
        for theta in (-0.05, 0.02, 0.3):
            assert solve_v(Spectrum(lam), theta).v == pytest.approx(tilt_point_mp(lam, theta), abs=1e-13)


def test_solve_v_many_vectorized_agrees():
    s = Spectrum(np.linspace(-1, 1, 7))
    thetas = np.array([-0.1, 0.0, 1e-9, 0.05, 0.1])
    many = solve_v_many(s, thetas)
    for t, v in zip(thetas, many):
        assert v == pytest.approx(solve_v(s, t).v, abs=1e-15)


def test_small_theta_limit_is_continuous():
    s = Spectrum([-1.0, 0.2, 0.9])
    assert solve_v(s, 1e-12).v == pytest.approx(np.mean(s.eigenvalues), abs=1e-10)


def test_tilt_denominators_reject_nonpositive():
    with pytest.raises(DomainError):
        tilt_denominators(Spectrum([-1.0, 1.0]), 1.0, -1.0)


def test_hilbert_transform():
    s = Spectrum([-1.0, 1.0])
    assert hilbert(s, 2.0) == pytest.approx(0.5 * (1 / 3 + 1))
    assert hilbert(s, 2.0, k=2) == pytest.approx(-0.5 * (1 / 9 + 1))
    h = 1e-5
    assert hilbert(s, 2.0, k=2) == pytest.approx((hilbert(s, 2.0 + h) - hilbert(s, 2.0 - h)) / (2 * h), rel=1e-8)
    assert hilbert(s, 3.0, k=0) == pytest.approx(0.5 * (math.log(4) + math.log(2)))
    with pytest.raises(DomainError):
        hilbert(s, 0.5)


def test_r_transform_inverts_hilbert():
    s = Spectrum([-1.0, 0.3, 2.0])
    z = 0.2
    r = r_transform(s, z)
    assert hilbert(s, r + 1 / z) == pytest.approx(z, abs=1e-13)


def test_r_integral_constant_spectrum():
    s = Spectrum.constant(0.4, 5)
    assert r_integral(s, 0.1) == pytest.approx(0.04, abs=1e-16)


@given(spectra_st, theta_st)
def test_a1_is_one(lam, theta):
    s = Spectrum(lam)
    assert abs(a_coeff(s, theta, k=1) - 1.0) <= 1e-12


@given(spectra_st, theta_st)
def test_fg_identities_hold(lam, theta):
    s = Spectrum(lam)
    tp = solve_v(s, theta)
    f, g = f_g(s, theta, tp)
    f2, g2 = fg_identities(theta, tp.v, a_coeff(s, theta, tp))
    assert abs(f - f2) <= 1e-10
    assert abs(g - g2) <= 1e-10


@given(spectra_st, theta_st)
def test_r_integral_closed_form_matches_quadrature(lam, theta):
    s = Spectrum(lam)
    assert abs(r_integral(s, theta) - r_integral_quadrature(s, theta)) <= 1e-8


@given(spectra_st, st.floats(-0.05, 0.05))
def test_ak_at_least_one(lam, theta):
    # Jensen: mean(1/d^k) >= mean(1/d)^k = 1
    s = Spectrum(lam)
    for k in (2, 3, 4):
        assert a_coeff(s, theta, k=k) >= 1.0 - 1e-12


@given(spectra_st, theta_st, st.floats(-2, 2))
def test_shift_moves_v(lam, theta, c):
    s = Spectrum(lam)
    assert solve_v(s.shifted(c), theta).v == pytest.approx(solve_v(s, theta).v + c, abs=1e-12)


def test_convergence_error_type_exists():
    assert issubclass(ConvergenceError, RuntimeError)
