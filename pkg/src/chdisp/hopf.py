"""Dispersionless (Hopf) limit: characteristics, gradient catastrophe, branch inverses.

The Hopf equation ``u_t + (3u + 2 nu) u_x = 0`` is solved implicitly by
``u = u0(xi)``, ``x = (3 u0(xi) + 2 nu) t + xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .specfun import DomainError

__all__ = [
    "Profile",
    "Sech2Profile",
    "HumpProfile",
    "InitialDatum",
    "MultivaluedError",
    "f_minus",
    "f_plus",
    "critical_point",
    "solve_hopf",
    "hopf_footpoint",
]


class MultivaluedError(ValueError):
    """Three characteristics cross at the requested point and no branch was chosen."""


class Profile:
    """Single negative hump ``u0(x)`` with Schwartz decay.

    Subclasses supply ``u0(x, order)`` returning the ``order``-th derivative
    and the location/value of the minimum.  Branch inverses default to
    vectorised bisection; subclasses may override with closed forms.
    """

    name = "generic"
    xmin: float
    umin: float

    def u0(self, x, order=0):
        raise NotImplementedError

    # -- branch inverses --------------------------------------------------
    def _inverse(self, u, side):
        u = np.asarray(u, dtype=float)
        if np.any((u <= self.umin) | (u >= 0.0)):
            raise DomainError(f"branch inverse defined on ({self.umin}, 0)")
        sgn = -1.0 if side == "minus" else 1.0
        # far end: walk outward until u0 exceeds every requested value
        width = 1.0
        while np.max(u) >= self.u0(self.xmin + sgn * width):
            width *= 2.0
            if width > 1e6:
                raise DomainError("profile does not decay fast enough to invert")
        lo = np.full(u.shape, self.xmin)
        hi = np.full(u.shape, self.xmin + sgn * width)
        # invariant: u0(lo) <= u < u0(hi) on this branch
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.u0(mid) <= u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(np.abs(hi - lo)) < 1e-15 * max(1.0, width):
                break
        x = 0.5 * (lo + hi)
        return x.item() if x.ndim == 0 else x

    def f_minus(self, u):
        """Inverse of the decreasing part ``x <= xmin``."""
        return self._inverse(u, "minus")

    def f_plus(self, u):
        """Inverse of the increasing part ``x >= xmin``."""
        return self._inverse(u, "plus")

    def f_minus_deriv(self, u, order=1):
        """Derivatives of ``f_minus`` in ``u`` (order 1, 2 or 3) via the inverse-function rule."""
        return self._inverse_deriv(self.f_minus(u), order)

    def f_plus_deriv(self, u, order=1):
        return self._inverse_deriv(self.f_plus(u), order)

    def _inverse_deriv(self, x, order):
        d1 = self.u0(x, 1)
        if order == 1:
            return 1.0 / d1
        d2 = self.u0(x, 2)
        if order == 2:
            return -d2 / d1 ** 3
        if order == 3:
            d3 = self.u0(x, 3)
            return (3.0 * d2 * d2 - d1 * d3) / d1 ** 5
        raise ValueError("order must be 1, 2 or 3")

    def domain_halfwidth(self, tol=1e-16):
        """Smallest L with |u0(+-L)| < tol."""
        L = 1.0
        while abs(self.u0(self.xmin - L)) >= tol or abs(self.u0(self.xmin + L)) >= tol:
            L *= 1.1
        return L


class Sech2Profile(Profile):
    """The reference datum ``u0(x) = -amp sech^2(x)``, with closed-form inverses."""

    name = "sech2"

    def __init__(self, amp=1.0):
        if amp <= 0:
            raise ValueError("amp must be positive")
        self.amp = float(amp)
        self.xmin = 0.0
        self.umin = -self.amp

    def u0(self, x, order=0):
        x = np.asarray(x, dtype=float)
        s2 = 1.0 / np.cosh(x) ** 2
        th = np.tanh(x)
        a = self.amp
        if order == 0:
            r = -a * s2
        elif order == 1:
            r = 2.0 * a * s2 * th
        elif order == 2:
            r = 2.0 * a * (s2 * s2 - 2.0 * s2 * th * th)
        elif order == 3:
            r = 2.0 * a * (-8.0 * s2 * s2 * th + 4.0 * s2 * th ** 3)
        else:
            raise ValueError("order must be 0..3")
        return r.item() if r.ndim == 0 else r

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= self.umin) | (u >= 0.0)):
            raise DomainError(f"branch inverse defined on ({self.umin}, 0), got {u[(u <= self.umin) | (u >= 0.0)][:3]}")
        return u

    def f_minus(self, u):
        u = self._check(u)
        r = -np.arccosh(np.sqrt(self.amp / -u))
        return r.item() if r.ndim == 0 else r

    def f_plus(self, u):
        u = self._check(u)
        r = np.arccosh(np.sqrt(self.amp / -u))
        return r.item() if r.ndim == 0 else r

    def f_minus_deriv(self, u, order=1):
        u = self._check(u)
        a = self.amp
        # x = f_-(u):  sech^2 = -u/a,  tanh = -sqrt(1 + u/a)
        w = np.sqrt(1.0 + u / a)
        if order == 1:
            r = 1.0 / (2.0 * u * w)
        elif order == 2:
            r = -(3.0 * u + 2.0 * a) / (4.0 * a * u * u * w ** 3)
        elif order == 3:
            r = (15.0 * u * u + 20.0 * a * u + 8.0 * a * a) / (8.0 * a * a * u ** 3 * w ** 5)
        else:
            raise ValueError("order must be 1, 2 or 3")
        return r.item() if r.ndim == 0 else r


class HumpProfile(Profile):
    """Arbitrary single-hump datum given by ``u0`` and its first three derivatives."""

    def __init__(self, derivs: Sequence[Callable], xmin: Optional[float] = None, name="custom"):
        if len(derivs) < 4:
            raise ValueError("need u0 and its first three derivatives")
        self._d = list(derivs)
        self.name = name
        if xmin is None:
            res = optimize.minimize_scalar(self._d[0], bracket=(-1.0, 0.0, 1.0))
            xmin = float(res.x)
        self.xmin = float(xmin)
        self.umin = float(self._d[0](self.xmin))

    def u0(self, x, order=0):
        r = np.asarray(self._d[order](np.asarray(x, dtype=float)))
        return r.item() if r.ndim == 0 else r


@dataclass
class InitialDatum:
    """Initial profile together with the equation parameters ``nu`` and ``eps``."""

    profile: Profile = field(default_factory=Sech2Profile)
    nu: float = 1.2
    eps: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")

    @property
    def xmin(self):
        return self.profile.xmin

    @property
    def umin(self):
        return self.profile.umin

    def u0(self, x, order=0):
        return self.profile.u0(x, order)

    def nonbreaking(self, L=None, n=20001):
        """Check ``u0 - eps^2 u0'' + nu > 0`` on a dense grid."""
        L = L or self.profile.domain_halfwidth(1e-12)
        x = np.linspace(self.xmin - L, self.xmin + L, n)
        m = self.u0(x) - self.eps ** 2 * self.u0(x, 2) + self.nu
        return bool(np.all(m > 0.0))

    def with_eps(self, eps):
        return InitialDatum(self.profile, self.nu, eps)


def f_minus(datum, u):
    """Inverse of the decreasing part of the datum, ``x <= xmin`` with ``u0(x) = u``."""
    return datum.profile.f_minus(u)


def f_plus(datum, u):
    """Inverse of the increasing part of the datum."""
    return datum.profile.f_plus(u)


def critical_point(datum):
    """First gradient catastrophe of the Hopf solution.

    Returns ``(t_c, x_c, u_c)`` where ``t_c = 1 / max(-3 u0')`` and the
    catastrophe sits on the characteristic from the maximiser ``xi*``.
    """
    prof = datum.profile
    if isinstance(prof, Sech2Profile):
        # u0'' = 0 on the left flank at tanh = -1/sqrt(3)
        xi = -math.atanh(1.0 / math.sqrt(3.0))
    else:
        L = prof.domain_halfwidth(1e-12)
        grid = np.linspace(prof.xmin - L, prof.xmin + L, 200001)
        slope = -3.0 * prof.u0(grid, 1)
        i = int(np.argmax(slope))
        if slope[i] <= 0.0:
            raise ValueError("u0' >= 0 everywhere: no gradient catastrophe")
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        xi = optimize.brentq(lambda s: prof.u0(s, 2), lo, hi, xtol=1e-15)
    slope = -3.0 * prof.u0(xi, 1)
    if slope <= 0.0:
        raise ValueError("u0' >= 0 everywhere: no gradient catastrophe")
    tc = 1.0 / slope
    uc = prof.u0(xi)
    xc = (3.0 * uc + 2.0 * datum.nu) * tc + xi
    return tc, xc, uc


def _char_residual(prof, nu, xi, x, t):
    return xi + (3.0 * prof.u0(xi) + 2.0 * nu) * t - x


def _solve_single(prof, nu, x, t, lo, hi):
    """Safeguarded Newton on a bracket where the residual is increasing."""
    xi = 0.5 * (lo + hi)
    for _ in range(200):
        g = _char_residual(prof, nu, xi, x, t)
        lo = np.where(g < 0.0, xi, lo)
        hi = np.where(g > 0.0, xi, hi)
        dg = 1.0 + 3.0 * t * prof.u0(xi, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xi - g / dg
        ok = (dg > 0.0) & (step > lo) & (step < hi)
        xi_new = np.where(ok, step, 0.5 * (lo + hi))
        if np.max(np.abs(xi_new - xi)) < 1e-15 * max(1.0, np.max(np.abs(xi))):
            xi = xi_new
            break
        xi = xi_new
    return xi


_CHUNK = 2048


def hopf_footpoint(datum, x, t, branch=None):
    """Characteristic foot-point ``xi`` with ``x = (3 u0(xi) + 2 nu) t + xi``.

    ``branch`` picks among multiple roots: ``"left"`` (smallest foot-point,
    largest u on the decreasing flank), ``"middle"`` or ``"right"``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size > _CHUNK:
        return np.concatenate([hopf_footpoint(datum, x[i:i + _CHUNK], t, branch) for i in range(0, x.size, _CHUNK)])
    prof = datum.profile
    nu = datum.nu
    a = -3.0 * prof.umin * t
    lo0 = x - 2.0 * nu * t
    hi0 = lo0 + a
    if t == 0.0:
        return x.copy()
    # multiplicity check on a bracket-relative grid
    s = np.linspace(0.0, 1.0, 801)
    xi_grid = lo0[:, None] + a * s[None, :]
    g = _char_residual(prof, nu, xi_grid, x[:, None], t)
    sign_changes = np.diff(np.sign(g), axis=1) != 0
    nroots = sign_changes.sum(axis=1)
    out = np.empty_like(x)
    single = nroots <= 1
    if np.any(single):
        out[single] = _solve_single(prof, nu, x[single], t, lo0[single], hi0[single])
    multi = np.flatnonzero(~single)
    if multi.size:
        if branch is None:
            raise MultivaluedError(f"Hopf solution multivalued at x={x[multi[:3]]}, t={t}")
        for i in multi:
            idx = np.flatnonzero(sign_changes[i])
            pick = {"left": idx[0], "middle": idx[len(idx) // 2], "right": idx[-1]}[branch]
            out[i] = optimize.brentq(
                lambda q: _char_residual(prof, nu, q, x[i], t),
                xi_grid[i, pick], xi_grid[i, pick + 1], xtol=1e-15, rtol=1e-15,
            )
    return out


def solve_hopf(datum, x, t, branch=None):
    """Hopf solution ``u(x, t)`` by the method of characteristics."""
    scalar = np.ndim(x) == 0
    xi = hopf_footpoint(datum, x, t, branch)
    u = datum.u0(xi)
    u = np.asarray(u)
    return float(u[0]) if scalar else u
