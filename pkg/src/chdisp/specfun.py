"""Special functions: complete elliptic integrals, Jacobi theta_3, Airy.

All routines accept scalars or numpy arrays and are pure.  Elliptic
integrals are parametrised by the modulus *squared* ``s2`` (``m`` in the
usual parameter convention).
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

__all__ = [
    "ellip_K",
    "ellip_E",
    "ellip_Lambda",
    "ellip_F",
    "ellip_Kc",
    "ellip_Ec",
    "ellip_Lambdac",
    "theta3",
    "theta3_logderiv",
    "airy",
    "DomainError",
    "PoleError",
]


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class PoleError(ArithmeticError):
    """theta_3 vanishes at the requested point."""


def _check_range(name, x, lo, hi, hi_closed=False):
    x = np.asarray(x, dtype=float)
    bad = (x < lo) | (x > hi if hi_closed else x >= hi) | ~np.isfinite(x)
    if np.any(bad):
        bracket = "]" if hi_closed else ")"
        raise DomainError(f"{name} must lie in [{lo}, {hi}{bracket}, got {x[bad].ravel()[:3]}")
    return x


def _unwrap(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def ellip_K(s2):
    """Complete elliptic integral of the first kind ``K(s)`` with ``s2 = s**2``.

    Evaluated as the Carlson form ``R_F(0, 1 - s2, 1)``.
    """
    m = _check_range("s2", s2, 0.0, 1.0)
    return _unwrap(special.elliprf(0.0, 1.0 - m, 1.0))


def ellip_E(s2):
    """Complete elliptic integral of the second kind ``E(s)``.

    ``E = R_F(0, 1-m, 1) - m/3 R_D(0, 1-m, 1)``; ``E(1) = 1`` is returned
    exactly.
    """
    m = _check_range("s2", s2, 0.0, 1.0, hi_closed=True)
    mc = 1.0 - m
    with np.errstate(divide="ignore", invalid="ignore"):
        val = special.elliprf(0.0, mc, 1.0) - m / 3.0 * special.elliprd(0.0, mc, 1.0)
    val = np.where(mc == 0.0, 1.0, val)
    return _unwrap(val)


def ellip_Lambda(s2, rho):
    r"""Complete integral of the third kind

    .. math:: \Lambda(s,\rho) = \int_0^1 \frac{dz}{(1-\rho z^2)\sqrt{(1-z^2)(1-s^2z^2)}}

    i.e. ``Pi(rho | s2)``.  Carlson form
    ``R_F(0,1-m,1) + rho/3 R_J(0,1-m,1,1-rho)``.
    """
    m = _check_range("s2", s2, 0.0, 1.0)
    n = _check_range("rho", rho, 0.0, 1.0)
    mc = 1.0 - m
    val = special.elliprf(0.0, mc, 1.0) + n / 3.0 * special.elliprj(0.0, mc, 1.0, 1.0 - n)
    return _unwrap(np.real(val))


def ellip_Kc(mc):
    """``K`` from the complementary parameter ``mc = 1 - s2`` (exact near ``s2 -> 1``)."""
    mc = _check_range("mc", mc, 0.0, 1.0, hi_closed=True)
    if np.any(mc == 0.0):
        raise DomainError("K diverges at mc = 0")
    return _unwrap(special.elliprf(0.0, mc, 1.0))


def ellip_Ec(mc):
    mc = _check_range("mc", mc, 0.0, 1.0, hi_closed=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = special.elliprf(0.0, mc, 1.0) - (1.0 - mc) / 3.0 * special.elliprd(0.0, mc, 1.0)
    return _unwrap(np.where(mc == 0.0, 1.0, val))


def ellip_Lambdac(mc, rho):
    """Third-kind integral from the complementary parameter."""
    mc = _check_range("mc", mc, 0.0, 1.0, hi_closed=True)
    n = _check_range("rho", rho, 0.0, 1.0)
    if np.any(mc == 0.0):
        raise DomainError("Lambda diverges at mc = 0")
    return _unwrap(np.real(special.elliprf(0.0, mc, 1.0) + n / 3.0 * special.elliprj(0.0, mc, 1.0, 1.0 - n)))


def ellip_F(phi, s2):
    """Incomplete integral of the first kind ``F(phi | s2)`` for ``0 <= phi <= pi/2``.

    Only needed internally for the Abel map of the one-phase solution.
    """
    m = np.asarray(s2, dtype=float)
    sn = np.sin(phi)
    cs = np.cos(phi)
    return sn * special.elliprf(cs * cs, 1.0 - m * sn * sn, 1.0)


# -- theta functions --------------------------------------------------------

_SERIES_EPS = 1e-17
_MODULAR_SWITCH = 0.5


def _is_pure_imag(tau):
    return np.real(tau) == 0.0


def _theta3_gauss(z, T, deriv):
    """theta_3(z, iT) via the modular image ``T^{-1/2} sum exp(-pi (n - z)^2 / T)``.

    Returns (theta, dtheta/dz) for real or complex z.  Used for small ``T``.
    """
    z = np.asarray(z)
    # centre the window on the nearest integer to Re z
    n0 = np.rint(np.real(z))
    nmax = int(math.ceil(math.sqrt(T * 40.0 / math.pi) + 2.0 + np.max(np.abs(np.imag(z)), initial=0.0)))
    n = np.arange(-nmax, nmax + 1)
    d = (n0[..., None] + n) - z[..., None]
    g = np.exp(-math.pi * d * d / T)
    th = g.sum(axis=-1) / math.sqrt(T)
    if not deriv:
        return th, None
    dth = (2.0 * math.pi / T * d * g).sum(axis=-1) / math.sqrt(T)
    return th, dth


def _theta3_series(z, tau, deriv):
    """Direct Fourier series, symmetric window around the dominant index."""
    z = np.asarray(z, dtype=complex)
    q = np.exp(1j * math.pi * tau)
    aq = abs(q)
    if np.all(np.imag(z) == 0.0) and _is_pure_imag(tau):
        # real cosine series 1 + 2 sum q^{n^2} cos(2 pi n z)
        x = np.real(z)
        nmax = 1
        while aq ** (nmax * nmax) > _SERIES_EPS:
            nmax += 1
        n = np.arange(1, nmax + 1)
        qn = aq ** (n * n)
        arg = 2.0 * math.pi * x[..., None] * n
        th = 1.0 + 2.0 * (qn * np.cos(arg)).sum(axis=-1)
        dth = None
        if deriv:
            dth = -4.0 * math.pi * (n * qn * np.sin(arg)).sum(axis=-1)
        return th, dth
    T = np.imag(tau)
    # term size exp(-pi n^2 T - 2 pi n Im z): peak at n = -Im z / T
    centre = np.rint(-np.imag(z) / T)
    half = int(math.ceil(math.sqrt(40.0 / (math.pi * T)))) + 2
    n = centre[..., None] + np.arange(-half, half + 1)
    terms = np.exp(1j * math.pi * n * n * tau + 2j * math.pi * n * z[..., None])
    th = terms.sum(axis=-1)
    dth = (2j * math.pi * n * terms).sum(axis=-1) if deriv else None
    return th, dth


def _theta3_pair(z, tau, deriv=False):
    tau = complex(tau)
    if not tau.imag > 0.0:
        raise DomainError(f"Im(tau) must be positive, got {tau}")
    z = np.asarray(z)
    if _is_pure_imag(tau) and tau.imag < _MODULAR_SWITCH:
        th, dth = _theta3_gauss(z, tau.imag, deriv)
    else:
        th, dth = _theta3_series(z, tau, deriv)
    if np.isrealobj(z) and _is_pure_imag(tau):
        th = np.real(th)
        dth = np.real(dth) if dth is not None else None
    return th, dth


def theta3(z, tau):
    r"""Jacobi theta function

    .. math:: \vartheta_3(z,\tau) = \sum_n \exp(i\pi n^2\tau + 2\pi i n z)

    Real ``z`` with purely imaginary ``tau`` returns real values.  For
    ``Im(tau) < 0.5`` (nome close to one) the modular image under
    ``tau -> -1/tau`` is summed instead.
    """
    th, _ = _theta3_pair(z, tau)
    return _unwrap(th)


def theta3_logderiv(z, tau):
    """Logarithmic derivative ``theta_3'(z, tau) / theta_3(z, tau)`` in ``z``."""
    th, dth = _theta3_pair(z, tau, deriv=True)
    if np.any(np.abs(th) < 1e-12):
        raise PoleError("theta_3 vanishes at the requested argument")
    return _unwrap(dth / th)


def theta3_logratio(z, p, tau):
    """``log(theta_3(z-p)/theta_3(z+p))`` and its z-derivative, for real z, p.

    Helper used by the one-phase solution; tau must be purely imaginary.
    """
    z = np.asarray(z, dtype=float)
    a, da = _theta3_pair(z - p, tau, deriv=True)
    b, db = _theta3_pair(z + p, tau, deriv=True)
    return np.log(a / b), da / a - db / b


# -- Airy ---------------------------------------------------------------

def airy(z):
    """Airy function ``Ai(z)`` for real ``|z| <= 20`` (``scipy.special.airy``)."""
    x = np.asarray(z, dtype=float)
    if np.any(np.abs(x) > 20.0) or not np.all(np.isfinite(x)):
        raise DomainError("airy is implemented for |z| <= 20")
    return _unwrap(special.airy(x)[0])
