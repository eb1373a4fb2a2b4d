"""One-phase (elliptic) travelling waves of CH in implicit theta-function form.

For a fixed triple ``b1 > b2 > b3 > -nu`` the wave is

    u = b1 + b2 + b3 + 2nu - 2(b3 + nu) Lambda/K + (2/I0) d/dz log R(z)
    (x - c t - q)/eps = 2 pi z / k - log R(z),   R = theta3(z-p)/theta3(z+p)

with real ``z`` and ``c = b1 + b2 + b3 + 2nu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, ellip_F, ellip_Kc, ellip_Lambdac, theta3_logderiv, theta3_logratio

__all__ = [
    "DegeneracyError",
    "RiemannTriple",
    "OnePhaseParams",
    "derive_params",
    "eval_onephase",
    "envelope",
    "small_amplitude",
    "small_amplitude_phase",
]


class DegeneracyError(DomainError):
    """Branch points too close for the elliptic formulas."""


@dataclass(frozen=True)
class RiemannTriple:
    b1: float
    b2: float
    b3: float
    nu: float

    def __post_init__(self):
        if not (-self.nu < self.b3 <= self.b2 <= self.b1):
            raise DomainError(f"need -nu < b3 <= b2 <= b1, got {self}")

    @property
    def c(self):
        return self.b1 + self.b2 + self.b3 + 2.0 * self.nu

    def as_tuple(self):
        return (self.b1, self.b2, self.b3)


@dataclass(frozen=True)
class OnePhaseParams:
    s2: float
    mc: float
    rho: float
    K: float
    Kp: float
    Lam: float
    I0: float
    p: float
    tau: complex
    k: float
    omega: float
    qshift: float
    base: float

    @property
    def nome(self):
        return math.exp(-math.pi * self.Kp / self.K)

    @property
    def wavelength(self):
        """Spatial period in units of ``eps``: ``2 pi / k``."""
        return 2.0 * math.pi / self.k


def derive_params(triple: RiemannTriple, qshift=None, datum=None, branch="minus") -> OnePhaseParams:
    """Elliptic data of the wave.

    ``qshift`` is the phase shift; when omitted it is computed from ``datum``
    through the modulation quadrature (zero if neither is given).
    """
    b1, b2, b3, nu = triple.b1, triple.b2, triple.b3, triple.nu
    d12, d23 = b1 - b2, b2 - b3
    if d12 < 1e-12 or d23 < 1e-12:
        raise DegeneracyError("collided branch points; use the edge limits")
    d13 = b1 - b3
    sq = math.sqrt((b2 + nu) * d13)
    mc = d12 * (b3 + nu) / ((b2 + nu) * d13)
    s2 = (b1 + nu) * d23 / ((b2 + nu) * d13)
    rho = d23 / (b2 + nu)
    K = ellip_Kc(mc)
    Kp = ellip_Kc(s2)
    Lam = ellip_Lambdac(mc, rho)
    I0 = 4.0 * K / sq
    p = ellip_F(math.asin(math.sqrt((b2 + nu) / (b1 + nu))), s2) / (2.0 * K)
    k = math.pi * sq / (2.0 * (b3 + nu) * Lam)
    if qshift is None:
        if datum is not None:
            from .whitham import q_function

            qshift = q_function(datum, triple.as_tuple(), branch=branch)
        else:
            qshift = 0.0
    base = triple.c - 2.0 * (b3 + nu) * Lam / K
    return OnePhaseParams(
        s2=s2, mc=mc, rho=rho, K=K, Kp=Kp, Lam=Lam, I0=I0, p=float(p), tau=1j * Kp / K,
        k=k, omega=triple.c * k, qshift=float(qshift), base=base,
    )


def _phase_of_z(z, P: OnePhaseParams):
    L, dL = theta3_logratio(z, P.p, P.tau)
    return 2.0 * math.pi * z / P.k - L, 2.0 * math.pi / P.k - dL, dL


def solve_phase(X, P: OnePhaseParams, tol=1e-14):
    """Invert ``X = 2 pi z/k - log R(z)`` for real z (vectorised).

    The map is increasing with ``X(z + 1) = X(z) + 2 pi/k``, so X is first
    reduced to ``[0, 2 pi/k)`` and z found in ``[0, 1]`` by bisection with a
    Newton polish.
    """
    X = np.asarray(X, dtype=float)
    per = 2.0 * math.pi / P.k
    n = np.floor(X / per)
    Xr = X - n * per
    lo = np.zeros_like(Xr)
    hi = np.ones_like(Xr)
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        f, _, _ = _phase_of_z(mid, P)
        up = f > Xr
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    z = 0.5 * (lo + hi)
    for _ in range(4):
        f, df, _ = _phase_of_z(z, P)
        if np.any(df <= 0.0):
            raise DomainError("phase map not monotone: parameters corrupted")
        dz = (f - Xr) / df
        z = np.clip(z - dz, lo, hi)
        if np.max(np.abs(dz), initial=0.0) < tol:
            break
    return z + n


def eval_onephase(x, t, params: OnePhaseParams, triple: RiemannTriple, eps):
    """Evaluate the one-phase wave at ``(x, t)``; vectorised in x.

    ``X = (x - c t - q)/eps`` is offset by half a period ``pi/k`` so that the
    origin sits at the trough ``z = 1/2``; with the crest there the
    Whitham-modulated wave is half a wavelength out of step with CH.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    X = (np.asarray(x, dtype=float) - triple.c * t - params.qshift) / eps + math.pi / params.k
    z = solve_phase(X, params)
    _, dL = theta3_logratio(z, params.p, params.tau)
    u = params.base + 2.0 / params.I0 * dL
    return float(u) if np.ndim(u) == 0 else u


def envelope(params: OnePhaseParams, triple: RiemannTriple):
    """``(u_min, u_max)`` from theta3'/theta3 at ``p`` and ``p + 1/2``.

    In the ``z`` variable ``d/dz log R = g(z-p) - g(z+p)`` with ``g`` odd
    about 0 and 1/2; its extremes are ``-2g(p)`` at ``z = 0`` and
    ``-2g(p + 1/2)`` at ``z = 1/2``.
    """
    gp = theta3_logderiv(params.p, params.tau)
    gh = theta3_logderiv(params.p + 0.5, params.tau)
    a = params.base - 4.0 / params.I0 * gp
    b = params.base - 4.0 / params.I0 * gh
    return (min(a, b), max(a, b))


def small_amplitude_phase(zeta, b1, v, delta, nu):
    """Trigonometric expansion in the phase: ``b1 + 2 delta cos - delta^2/2 ... (1 - cos 2 zeta)``."""
    zeta = np.asarray(zeta, dtype=float)
    return b1 + 2.0 * delta * np.cos(zeta) - 0.5 * delta ** 2 * (b1 + nu) / ((b1 - v) * (v + nu)) * (
        1.0 - np.cos(2.0 * zeta)
    )


def small_amplitude(x, t, eps, u, v, xminus, delta, *, nu, Phi, fprime):
    """Leading-edge expansion of the one-phase wave.

    ``u``, ``v`` are the edge values, ``Phi = Phi(u, v)`` and
    ``fprime = f_-'(u)``.  The phase is ``xi0 + xi1`` with
    ``xi0 = -2 sqrt((u-v)(v+nu)) (Phi + 3t)`` and
    ``xi1 = sqrt((u-v)/(v+nu)) (x - x-)``.
    """
    x = np.asarray(x, dtype=float)
    dx = x - xminus
    xi = -2.0 * math.sqrt((u - v) * (v + nu)) * (Phi + 3.0 * t) + math.sqrt((u - v) / (v + nu)) * dx
    out = (
        u
        + dx / (3.0 * t + fprime)
        + 2.0 * delta * np.cos(xi / eps)
        - 0.5 * delta ** 2 * (u + nu) / ((u - v) * (v + nu)) * (1.0 - np.cos(2.0 * xi / eps))
    )
    return float(out) if out.ndim == 0 else out
