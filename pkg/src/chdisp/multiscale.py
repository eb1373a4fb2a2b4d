"""Painleve-II multiscale description of CH near the leading edge.

Near ``x-(t)`` with ``y = eps**(-2/3) (x - x-)``,

    u = u(t) + eps^{1/3} a cos(psi/eps)
        + eps^{2/3} [a^2 (u+nu)(cos(2 psi/eps) - 1) / (8 (u-v)(v+nu)) + y/(3t + f'(u))],

with ``a(y) = beta A(alpha y)`` and ``A`` the Hastings-McLeod solution of
``A'' = z A + 2 A^3``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from .hopf import InitialDatum
from .specfun import airy
from .whitham import ConvergenceError, LeadingEdgeState, Modulation, _toolkit

log = logging.getLogger(__name__)

__all__ = [
    "HastingsMcLeod",
    "MultiscaleFrame",
    "solve_hastings_mcleod",
    "hm_left_tail",
    "frame_at",
    "eval_multiscale",
    "coeff_c2",
    "coeff_c3",
    "coeff_b1",
]


def hm_left_tail(z):
    """``sqrt(-z/2) (1 + 1/(8 z^3) - 73/(128 z^6))`` for ``z -> -inf``."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(-0.5 * z) * (1.0 + 1.0 / (8.0 * z ** 3) - 73.0 / (128.0 * z ** 6))


def _airy_tail(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = z <= 20.0
    out[inside] = airy(z[inside])
    zz = z[~inside]
    out[~inside] = np.exp(-2.0 / 3.0 * zz ** 1.5) / (2.0 * math.sqrt(math.pi) * zz ** 0.25)
    return out


@dataclass(frozen=True)
class HastingsMcLeod:
    zgrid: np.ndarray
    A: np.ndarray
    Az: np.ndarray
    residual: float

    @property
    def Lz(self):
        return float(self.zgrid[-1])

    def _spline(self):
        sp = getattr(self, "_sp", None)
        if sp is None:
            sp = CubicHermiteSpline(self.zgrid, self.A, self.Az)
            object.__setattr__(self, "_sp", sp)
        return sp

    def __call__(self, z, warn=True):
        """Interpolated ``A(z)``; outside the grid the tail asymptotics are used."""
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        inside = (z >= self.zgrid[0]) & (z <= self.zgrid[-1])
        out[inside] = self._spline()(z[inside])
        right = z > self.zgrid[-1]
        left = z < self.zgrid[0]
        if warn and (np.any(right) or np.any(left)):
            warnings.warn("Hastings-McLeod evaluated outside its grid; using tail asymptotics", RuntimeWarning)
        out[right] = _airy_tail(z[right])
        out[left] = hm_left_tail(z[left])
        return float(out) if out.ndim == 0 else out


def _newton_bvp(A, z, h, left, right, numerov, tol=1e-10, maxit=50):
    """Damped Newton for the tridiagonal discretisation with Dirichlet ends."""
    n = z.size
    A = A.copy()
    A[0], A[-1] = left, right
    w = (1.0 / 12.0, 10.0 / 12.0, 1.0 / 12.0) if numerov else (0.0, 1.0, 0.0)

    def resid(A):
        g = z * A + 2.0 * A ** 3
        r = (A[2:] - 2.0 * A[1:-1] + A[:-2]) / h ** 2 - (w[0] * g[:-2] + w[1] * g[1:-1] + w[2] * g[2:])
        return r

    r = resid(A)
    nr = np.max(np.abs(r))
    for _ in range(maxit):
        if nr < tol:
            break
        dg = z + 6.0 * A ** 2
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = 1.0 / h ** 2 - w[2] * dg[2:-1]
        ab[1, :] = -2.0 / h ** 2 - w[1] * dg[1:-1]
        ab[2, :-1] = 1.0 / h ** 2 - w[0] * dg[1:-2]
        step = solve_banded((1, 1), ab, -r)
        lam = 1.0
        while True:
            At = A.copy()
            At[1:-1] += lam * step
            rt = resid(At)
            nt = np.max(np.abs(rt))
            if nt < nr or nt < tol or lam < 1e-6:
                break
            lam *= 0.5
        if lam < 1e-6 and nt >= nr:
            if nr < 1e-8:
                break  # round-off floor of the 1/h^2 stencil
            raise ConvergenceError("Hastings-McLeod Newton stalled", nr)
        A, r, nr = At, rt, nt
        if np.max(np.abs(lam * step)) < 1e-15:
            break
    else:
        if nr > 1e-8:
            raise ConvergenceError("Hastings-McLeod Newton did not converge", nr)
    return A, nr


def solve_hastings_mcleod(Lz=12.0, n=6000, seed="airy"):
    """Hastings-McLeod solution on ``[-Lz, Lz]`` with ``n`` intervals.

    Dirichlet data ``Ai(Lz)`` and the left-tail series at ``-Lz``.  A
    second-order finite-difference system is solved by Newton from the
    ``seed`` guess ('airy': Ai on the right blended into the left tail,
    'sqrt': ``sqrt(max(-z/2, 0))`` smoothed), then the fourth-order
    (Numerov) corrected system is solved starting from it.
    """
    if Lz < 8.0 or n < 2000:
        raise ValueError("need Lz >= 8 and n >= 2000")
    z = np.linspace(-Lz, Lz, n + 1)
    h = z[1] - z[0]
    left = float(hm_left_tail(-Lz))
    right = float(airy(Lz))
    if seed == "airy":
        s = 0.5 * (1.0 + np.tanh(z))
        guess = s * airy(np.clip(z, -20, 20)) + (1.0 - s) * np.sqrt(np.maximum(-0.5 * z, 0.0) + 0.1)
        guess = np.abs(guess)
    elif seed == "sqrt":
        guess = np.sqrt(0.5 * (np.sqrt(z * z + 1.0) - z)) * np.exp(-np.maximum(z, 0.0))
    else:
        raise ValueError("seed must be 'airy' or 'sqrt'")
    A2, _ = _newton_bvp(guess, z, h, left, right, numerov=False)
    A4, res = _newton_bvp(A2, z, h, left, right, numerov=True)
    if np.any(A4 <= 0.0):
        raise ConvergenceError("non-positive solution: wrong Painleve branch", res)
    # fourth-order derivative: central differences inside, one-sided at the ends
    Az = np.empty_like(A4)
    Az[2:-2] = (A4[:-4] - 8.0 * A4[1:-3] + 8.0 * A4[3:-1] - A4[4:]) / (12.0 * h)
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    Az[0] = c @ A4[:5]
    Az[1] = (-3.0 * A4[0] - 10.0 * A4[1] + 18.0 * A4[2] - 6.0 * A4[3] + A4[4]) / (12.0 * h)
    Az[-1] = -(c @ A4[::-1][:5])
    Az[-2] = -(-3.0 * A4[-1] - 10.0 * A4[-2] + 18.0 * A4[-3] - 6.0 * A4[-4] + A4[-5]) / (12.0 * h)
    return HastingsMcLeod(zgrid=z, A=A4, Az=Az, residual=res)


@lru_cache(maxsize=4)
def default_hm():
    return solve_hastings_mcleod()


@dataclass(frozen=True)
class MultiscaleFrame:
    """Time-dependent data of the multiscale solution.

    ``A1 < 0`` for decreasing data (``V < 0``), so ``alpha`` is the real
    (negative) cube root and the Whitham side ``y > 0`` maps to ``z < 0``.
    ``beta = alpha sqrt(2)/sqrt(A2)`` then is negative as well; flipping its
    sign would shift the oscillation by half a wavelength against CH.
    """

    t: float
    edge: LeadingEdgeState
    psi0: float
    A1: float
    A2: float
    alpha: float
    beta: float
    f2: float

    @property
    def f2_alternative(self):
        """Second root for ``f2**2`` of the phase-slope quadratic (diagnostic only)."""
        u, v, nu = self.edge.u, self.edge.v, self.edge.nu
        return (2.0 * v + u + 3.0 * nu) / (u - nu - 2.0 * v)

    def A1_from_vt(self, vt):
        u, v, nu = self.edge.u, self.edge.v, self.edge.nu
        return (u + nu) ** 3 * vt / (4.0 * (u - v) * (v + nu) ** 3 * (3.0 * nu + 4.0 * v - u))

    def psi0_t(self):
        u, v, nu = self.edge.u, self.edge.v, self.edge.nu
        return -4.0 * math.sqrt((v + nu) / (u - v)) * (u - v) ** 2 / (u + nu)


def frame_at(datum: InitialDatum, t, modulation: Modulation = None) -> MultiscaleFrame:
    mod = modulation or _toolkit(datum)
    e = mod.leading_edge(t)
    u, v, nu = e.u, e.v, e.nu
    psi0 = -2.0 * math.sqrt((u - v) * (v + nu)) * (e.Phi + 3.0 * t)
    A1 = (u + nu) ** 3 / (e.V * (v + nu) ** 2)
    A2 = (u + nu) ** 2 / (32.0 * (u - v) * (v + nu) ** 3)
    alpha = math.copysign(abs(A1) ** (1.0 / 3.0), A1)
    beta = alpha * math.sqrt(2.0) / math.sqrt(A2)
    return MultiscaleFrame(t=t, edge=e, psi0=psi0, A1=A1, A2=A2, alpha=alpha, beta=beta,
                           f2=math.sqrt((u - v) / (v + nu)))


def eval_multiscale(x, t, eps, frame: MultiscaleFrame, hm: HastingsMcLeod = None):
    """Multiscale leading-edge approximation (truncated at ``O(eps^{2/3})``)."""
    hm = hm or default_hm()
    e = frame.edge
    if abs(t - frame.t) > 1e-12:
        raise ValueError("frame was built for a different time")
    u, v, nu = e.u, e.v, e.nu
    x = np.asarray(x, dtype=float)
    y = (x - e.xminus) / eps ** (2.0 / 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = frame.beta * hm(frame.alpha * y, warn=False)
    psi = frame.psi0 + eps ** (2.0 / 3.0) * y * frame.f2
    ph = psi / eps
    out = (
        u
        + eps ** (1.0 / 3.0) * a * np.cos(ph)
        + eps ** (2.0 / 3.0) * (a * a * (u + nu) * (np.cos(2.0 * ph) - 1.0) / (8.0 * (u - v) * (v + nu))
                                 + y / (3.0 * t + e.fprime))
    )
    return float(out) if out.ndim == 0 else out


def coeff_c2(a, ay, f2, u, nu):
    return a * ay * (f2 ** 4 - 1.0) / (4.0 * (u + nu) * f2 ** 3)


def coeff_c3(a, f2, u, nu):
    return a ** 3 * (3.0 + 7.0 * f2 ** 2) * (1.0 + f2 ** 2) ** 3 / (256.0 * (u + nu) ** 2 * f2 ** 4)


def coeff_b1(a, y, ut, f2, u, nu, g1=0.0):
    """Non-oscillatory second-order coefficient (``g1 = 0`` by matching)."""
    return -(a * a * (3.0 + f2 ** 2) + 4.0 * ut * y) * (1.0 + f2 ** 2) ** 2 / (
        8.0 * f2 ** 2 * (3.0 + f2 ** 2) * (u + nu)
    ) + g1
