import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from chdisp.hopf import (
    HumpProfile,
    InitialDatum,
    MultivaluedError,
    Sech2Profile,
    critical_point,
    f_minus,
    f_plus,
    hopf_footpoint,
    solve_hopf,
)
from chdisp.specfun import DomainError


def gauss_profile():
    g = lambda x: -np.exp(-x * x)
    g1 = lambda x: 2 * x * np.exp(-x * x)
    g2 = lambda x: (2 - 4 * x * x) * np.exp(-x * x)
    g3 = lambda x: (-12 * x + 8 * x ** 3) * np.exp(-x * x)
    return HumpProfile([g, g1, g2, g3], xmin=0.0, name="gauss")


@given(st.floats(-6.0, -1e-3))
def test_f_minus_round_trip(x):
    d = InitialDatum()
    u = d.u0(x)
    assert f_minus(d, u) == pytest.approx(x, rel=1e-10, abs=1e-10)


def test_f_minus_closed_form_against_bisection():
    d = InitialDatum()
    ref = optimize.brentq(lambda x: d.u0(x) + 0.5, -5.0, 0.0, xtol=1e-15)
    assert f_minus(d, -0.5) == pytest.approx(-math.acosh(math.sqrt(2.0)), abs=1e-14)
    assert f_minus(d, -0.5) == pytest.approx(ref, abs=1e-12)
    assert f_plus(d, -0.5) == pytest.approx(-ref, abs=1e-12)


def test_f_minus_near_minimum_and_domain():
    d = InitialDatum()
    assert f_minus(d, -1.0 + 1e-14) == pytest.approx(0.0, abs=1e-6)
    for bad in (-1.0, 0.0, 0.1, -1.5):
        with pytest.raises(DomainError):
            f_minus(d, bad)


def test_generic_inverse_matches_closed_form():
    """The bisection inverse of the generic profile agrees with arccosh."""
    sech = Sech2Profile()
    hp = HumpProfile([lambda x, k=k: sech.u0(x, k) for k in range(4)], xmin=0.0)
    u = np.linspace(-0.99, -0.01, 11)
    assert np.allclose(hp.f_minus(u), sech.f_minus(u), atol=1e-13)
    assert np.allclose(hp.f_minus_deriv(u, 2), sech.f_minus_deriv(u, 2), rtol=1e-9)
    assert np.allclose(hp.f_minus_deriv(u, 3), sech.f_minus_deriv(u, 3), rtol=1e-9)


def test_f_minus_derivatives_fd():
    p = Sech2Profile()
    u, h = -0.37, 1e-5
    for k in (1, 2, 3):
        lo = p.f_minus(u - h) if k == 1 else p.f_minus_deriv(u - h, k - 1)
        hi = p.f_minus(u + h) if k == 1 else p.f_minus_deriv(u + h, k - 1)
        assert p.f_minus_deriv(u, k) == pytest.approx((hi - lo) / (2 * h), rel=1e-7)


def test_critical_time_exact():
    tc, xc, uc = critical_point(InitialDatum())
    assert abs(tc - math.sqrt(3) / 4) < 1e-14
    assert uc == pytest.approx(-2.0 / 3.0, abs=1e-14)


@pytest.mark.parametrize("nu", [1.02, 1.2, 2.0])
def test_critical_value_independent_of_nu(nu):
    _, _, uc = critical_point(InitialDatum(nu=nu))
    assert uc == pytest.approx(-2.0 / 3.0, abs=1e-14)


def test_critical_point_grid_oracle():
    d = InitialDatum(nu=1.2)
    tc, xc, uc = critical_point(d)
    g = np.linspace(-1.0, 0.0, 2_000_001)
    s = -3 * d.u0(g, 1)
    i = np.argmax(s)
    # refine by a parabola through the three best samples
    xi = g[i] - 0.5 * (g[1] - g[0]) * (s[i + 1] - s[i - 1]) / (s[i + 1] - 2 * s[i] + s[i - 1])
    xref = (3 * d.u0(xi) + 2 * d.nu) / s.max() + xi
    assert xc == pytest.approx(xref, abs=1e-8)


def test_critical_point_generic_profile():
    d = InitialDatum(gauss_profile(), nu=1.2)
    tc, xc, uc = critical_point(d)
    assert tc == pytest.approx(1.0 / (3.0 * math.sqrt(2.0) * math.exp(-0.5)), rel=1e-12)
    assert uc == pytest.approx(-math.exp(-0.5), rel=1e-12)


def test_no_catastrophe():
    flat = HumpProfile([lambda x: 0 * x + 1.0, lambda x: 0 * x, lambda x: 0 * x, lambda x: 0 * x], xmin=0.0)
    with pytest.raises(ValueError):
        critical_point(InitialDatum(flat))


def test_hopf_t0_round_trip():
    d = InitialDatum()
    x = np.linspace(-20, 20, 4001)
    assert np.max(np.abs(solve_hopf(d, x, 0.0) - d.u0(x))) < 1e-13


def test_hopf_far_field_and_characteristic_residual():
    d = InitialDatum()
    t = 0.3
    x = np.linspace(-20, 20, 801)
    u = solve_hopf(d, x, t)
    assert abs(u[0]) < 1e-12 and abs(u[-1]) < 1e-12
    xi = hopf_footpoint(d, x, t)
    assert np.max(np.abs(x - (3 * u + 2 * d.nu) * t - xi)) < 1e-12


def test_hopf_fan_oracle():
    """Dense sampling of the characteristic fan, then local inverse interpolation."""
    d = InitialDatum()
    t = 0.2
    xi = np.linspace(-3.0, 3.0, 1_000_001)
    X = (3 * d.u0(xi) + 2 * d.nu) * t + xi
    j = np.searchsorted(X, 0.0)
    # Newton polish from the bracketing sample (fan is monotone for t < tc)
    s = xi[j]
    for _ in range(5):
        s -= ((3 * d.u0(s) + 2 * d.nu) * t + s) / (3 * d.u0(s, 1) * t + 1)
    assert solve_hopf(d, 0.0, t) == pytest.approx(d.u0(s), abs=1e-10)
    assert X[j - 1] < 0.0 <= X[j]


def test_conservation_along_characteristics():
    d = InitialDatum()
    xi0 = np.linspace(-4, 4, 50)
    for t in (0.1, 0.25, 0.4):
        x = (3 * d.u0(xi0) + 2 * d.nu) * t + xi0
        assert np.max(np.abs(solve_hopf(d, x, t) - d.u0(xi0))) < 1e-12


def test_gradient_blowup_rate():
    d = InitialDatum()
    tc = critical_point(d)[0]
    ts = tc * np.linspace(0.8, 0.99, 8)
    xi = np.linspace(-1.5, 0.0, 400001)
    gmax = []
    for t in ts:
        # u_x = u0'(xi)/(1 + 3 t u0'(xi)) along characteristics
        g = d.u0(xi, 1) / (1 + 3 * t * d.u0(xi, 1))
        gmax.append(np.max(np.abs(g)))
    slope = np.polyfit(np.log(tc - ts), np.log(gmax), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.05)
    # the same from the solver on a grid around the steepening point
    t = 0.95 * tc
    x = np.linspace(-0.6, -0.3, 20001)
    u = solve_hopf(d, x, t)
    ref = np.max(np.abs(d.u0(xi, 1) / (1 + 3 * t * d.u0(xi, 1))))
    assert np.max(np.abs(np.diff(u) / np.diff(x))) == pytest.approx(ref, rel=1e-3)


def test_multivalued_after_breaking():
    d = InitialDatum()
    tc, xc, uc = critical_point(d)
    t = 1.0
    # a point inside the fold
    x = np.linspace(-1.0, 0.5, 301)
    with pytest.raises(MultivaluedError):
        solve_hopf(d, x, t)
    ul = solve_hopf(d, x, t, branch="left")
    ur = solve_hopf(d, x, t, branch="right")
    assert np.all(ul >= ur - 1e-14)
    assert np.any(ul > ur + 1e-3)


def test_nonbreaking_condition():
    assert InitialDatum(nu=1.2, eps=0.1).nonbreaking()
    # eps^2 < (nu - 1)/2 is sufficient for sech^2; a large eps violates it
    assert not InitialDatum(nu=1.02, eps=0.9).nonbreaking()
    with pytest.raises(ValueError):
        InitialDatum(eps=0.0)
