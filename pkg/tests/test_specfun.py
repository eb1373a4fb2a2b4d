import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from chdisp.specfun import (
    DomainError,
    PoleError,
    airy,
    ellip_E,
    ellip_Ec,
    ellip_F,
    ellip_K,
    ellip_Kc,
    ellip_Lambda,
    ellip_Lambdac,
    theta3,
    theta3_logderiv,
    theta3_logratio,
)


def agm_KE(m):
    """K and E by the arithmetic-geometric mean with the Gauss sum for E."""
    a, b = 1.0, math.sqrt(1.0 - m)
    c = math.sqrt(m)
    s = 0.5 * c * c
    p = 1.0
    for _ in range(60):
        if abs(c) < 1e-17 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        p *= 2.0
        s += 0.5 * p * c * c
    K = math.pi / (2.0 * a)
    return K, K * (1.0 - s)


# -- complete integrals ------------------------------------------------------

def test_K_E_at_zero():
    assert ellip_K(0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    assert ellip_E(0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    assert ellip_E(1.0) == 1.0


def test_K_monotone_and_log_growth():
    assert ellip_K(0.99) > ellip_K(0.9) > ellip_K(0.5)
    mc = 1e-12
    assert ellip_Kc(mc) == pytest.approx(0.5 * math.log(16.0 / mc), rel=1e-10)


@pytest.mark.parametrize("m", [0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_K_E_against_agm(m):
    K, E = agm_KE(m)
    assert ellip_K(m) == pytest.approx(K, rel=1e-13, abs=1e-12)
    assert ellip_E(m) == pytest.approx(E, rel=1e-13, abs=1e-12)
    assert ellip_Kc(1.0 - m) == pytest.approx(K, rel=1e-13)
    assert ellip_Ec(1.0 - m) == pytest.approx(E, rel=1e-13)


def test_legendre_relation():
    m = 0.37
    K, E, Kp, Ep = ellip_K(m), ellip_E(m), ellip_K(1 - m), ellip_E(1 - m)
    assert E * Kp + Ep * K - K * Kp == pytest.approx(math.pi / 2, rel=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        ellip_K(1.0)
    with pytest.raises(DomainError):
        ellip_K(-0.1)
    with pytest.raises(DomainError):
        ellip_E(1.5)
    with pytest.raises(DomainError):
        ellip_Lambda(0.3, 1.0)


def test_Lambda_closed_form_circular():
    assert ellip_Lambda(0.0, 0.5) == pytest.approx(math.pi / math.sqrt(2.0), rel=1e-14)


def test_Lambda_against_quadrature():
    s2, rho = 0.3, 0.2
    f = lambda th: 1.0 / ((1.0 - rho * math.sin(th) ** 2) * math.sqrt(1.0 - s2 * math.sin(th) ** 2))
    ref, _ = integrate.quad(f, 0.0, math.pi / 2, epsabs=1e-14, epsrel=1e-14)
    assert ellip_Lambda(s2, rho) == pytest.approx(ref, abs=1e-10)
    assert ellip_Lambdac(1.0 - s2, rho) == pytest.approx(ref, abs=1e-10)


@given(st.floats(0.0, 0.999))
def test_Lambda_rho_zero_is_K(s2):
    assert ellip_Lambda(s2, 0.0) == pytest.approx(ellip_K(s2), rel=1e-14)


def test_incomplete_F():
    assert ellip_F(math.pi / 2, 0.4) == pytest.approx(ellip_K(0.4), rel=1e-14)
    ref, _ = integrate.quad(lambda th: 1.0 / math.sqrt(1 - 0.4 * math.sin(th) ** 2), 0, 0.7, epsabs=1e-15)
    assert ellip_F(0.7, 0.4) == pytest.approx(ref, rel=1e-13)


# -- theta_3 -----------------------------------------------------------------

def theta3_direct(z, tau, nterms=50):
    n = np.arange(-nterms, nterms + 1)
    return np.sum(np.exp(1j * math.pi * n * n * tau + 2j * math.pi * n * z))


def test_theta_tiny_nome():
    assert theta3(0.3, 50j) == pytest.approx(1.0, abs=1e-15)


def test_theta_series_oracle():
    assert theta3(0.1, 1j) == pytest.approx(theta3_direct(0.1, 1j).real, abs=1e-14)
    # modular branch (Im tau < 0.5)
    assert theta3(0.1, 0.2j) == pytest.approx(theta3_direct(0.1, 0.2j, 200).real, rel=1e-13)


def test_theta_domain():
    with pytest.raises(DomainError):
        theta3(0.1, -1j)
    with pytest.raises(DomainError):
        theta3(0.1, 0.3)


@given(
    st.floats(-2.0, 2.0),
    st.floats(-0.4, 0.4),
    st.floats(0.15, 3.0),
    st.floats(-0.5, 0.5),
)
def test_theta_periodicity_and_quasiperiodicity(x, y, T, re):
    tau = complex(re, T)
    z = complex(x, y)
    th = theta3(z, tau)
    assert abs(theta3(z + 1.0, tau) - th) <= 1e-12 * max(1.0, abs(th))
    lhs = theta3(z + tau, tau)
    rhs = np.exp(-1j * math.pi * tau - 2j * math.pi * z) * th
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_logderiv_zeros_and_fd():
    assert theta3_logderiv(0.0, 0.8j) == pytest.approx(0.0, abs=1e-15)
    assert theta3_logderiv(0.5, 0.8j) == pytest.approx(0.0, abs=1e-13)
    h = 1e-6
    fd = (math.log(theta3(0.2 + h, 0.8j)) - math.log(theta3(0.2 - h, 0.8j))) / (2 * h)
    assert theta3_logderiv(0.2, 0.8j) == pytest.approx(fd, abs=1e-8)


def test_logderiv_sine_series():
    """``theta3'/theta3 = 4 pi sum (-1)^n q^n/(1 - q^{2n}) sin(2 pi n z)``."""
    tau = 0.6j
    q = math.exp(-math.pi * 0.6)
    z = 0.17
    n = np.arange(1, 200)
    ref = 4 * math.pi * np.sum((-1.0) ** n * q ** n / (1 - q ** (2 * n)) * np.sin(2 * math.pi * n * z))
    assert theta3_logderiv(z, tau) == pytest.approx(ref, rel=1e-12)


@given(st.floats(0.0, 0.49), st.floats(0.1, 4.0))
def test_logderiv_odd(z, T):
    tau = 1j * T
    assert theta3_logderiv(-z, tau) == pytest.approx(-theta3_logderiv(z, tau), abs=1e-12)
    a = theta3_logderiv(0.5 + z, tau)
    b = theta3_logderiv(0.5 - z, tau)
    assert a == pytest.approx(-b, abs=1e-12 * max(1.0, abs(a)))


def test_logderiv_pole():
    # theta3 vanishes at z = 1/2 + tau/2
    with pytest.raises(PoleError):
        theta3_logderiv(0.5 + 0.5j, 1j)


def test_logratio_consistency():
    z = np.linspace(0.0, 1.0, 7)
    L, dL = theta3_logratio(z, 0.2, 0.9j)
    assert np.allclose(L, np.log(theta3(z - 0.2, 0.9j) / theta3(z + 0.2, 0.9j)), atol=1e-14)
    assert np.allclose(dL, theta3_logderiv(z - 0.2, 0.9j) - theta3_logderiv(z + 0.2, 0.9j), atol=1e-12)


# -- Airy ----------------------------------------------------------------------

def airy_series(z, nterms=60):
    c1, c2 = 0.355028053887817239, 0.258819403792806798
    f, g, tf, tg = 1.0, z, 1.0, z
    for k in range(1, nterms):
        tf *= z ** 3 / ((3 * k - 1) * (3 * k))
        tg *= z ** 3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
    return c1 * f - c2 * g


def test_airy_series_oracle():
    assert airy(0.0) == pytest.approx(airy_series(0.0), abs=1e-15)
    assert airy(1.3) == pytest.approx(airy_series(1.3), abs=1e-13)


def test_airy_decay():
    z = np.linspace(1.0, 20.0, 200)
    a = airy(z)
    assert 0.0 < airy(5.0) < 1e-3
    assert np.all(np.diff(a) < 0.0) and np.all(a > 0.0)


def test_airy_ode_oracle():
    c1, c2 = 0.355028053887817239, 0.258819403792806798
    sol = integrate.solve_ivp(lambda z, y: [y[1], z * y[0]], (0.0, -2.0), [c1, -c2], rtol=1e-13, atol=1e-15,
                              method="DOP853")
    assert airy(-2.0) == pytest.approx(sol.y[0, -1], abs=1e-10)


def test_airy_domain():
    with pytest.raises(DomainError):
        airy(25.0)
