"""CH modulation (Whitham) equations solved by the generalised hodograph transform.

The Riemann invariants ``b1 > b2 > b3`` satisfy ``x = C_i t + w_i`` with
``w_i = q + (C_i - c) d_i q`` and ``c = b1 + b2 + b3 + 2 nu``.  ``q`` is an
Euler-Poisson-Darboux average of the inverse ``f_-`` of the decreasing
flank of the datum.

Once ``b3`` has passed the hump minimum it lives on the increasing flank.
There ``q`` is continued analytically around the square-root branch point
at ``umin``, which adds ``(1/2pi) int_umin^b3 (f_- - f_+)(a) K(a) da``.
``b3 = umin + w3**2`` with ``w3 < 0`` selects that continued branch.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hopf import InitialDatum, critical_point
from .specfun import DomainError, ellip_Ec, ellip_Kc, ellip_Lambdac

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceError",
    "LeadingEdgeState",
    "TrailingEdgeState",
    "WhithamSolution",
    "QFamily",
    "Modulation",
    "speeds",
    "q_function",
    "w_transport",
    "solve_zone",
    "leading_edge",
    "trailing_edge",
    "edge_gap_laws",
]


class ConvergenceError(RuntimeError):
    """Newton iteration failed; ``residual`` holds the last residual norm."""

    def __init__(self, msg, residual=float("nan")):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


# -- elliptic data ---------------------------------------------------------

def _ell(b1, b2, b3, nu, d12=None, d23=None):
    """Modulus data ``(mc, s2, rho, K, E, Lambda)``; differences passed explicitly keep precision."""
    d12 = b1 - b2 if d12 is None else d12
    d23 = b2 - b3 if d23 is None else d23
    d13 = d12 + d23
    mc = d12 * (b3 + nu) / ((b2 + nu) * d13)
    s2 = (b1 + nu) * d23 / ((b2 + nu) * d13)
    rho = d23 / (b2 + nu)
    K = ellip_Kc(mc)
    E = ellip_Ec(mc)
    L = ellip_Lambdac(mc, rho)
    return mc, s2, rho, K, E, L


def _speeds(b1, b2, b3, nu, d12=None, d23=None):
    """(C1 - c, C2 - c, C3 - c, c, rho21) with rho21 = (C2 - c)/(C1 - c)."""
    d12 = b1 - b2 if d12 is None else d12
    d23 = b2 - b3 if d23 is None else d23
    d13 = d12 + d23
    _, _, _, K, E, L = _ell(b1, b2, b3, nu, d12, d23)
    c = b1 + b2 + b3 + 2.0 * nu
    g1 = 2.0 * (b3 + nu) * d12 * L / ((b2 + nu) * E)
    den2 = (b3 + nu) * K * d12 - (b2 + nu) * d13 * E
    g2 = 2.0 * d23 * L * (b3 + nu) * d12 / den2
    g3 = -2.0 * (b3 + nu) * d23 * L / ((b2 + nu) * (K - E))
    rho21 = d23 * (b2 + nu) * E / den2
    return g1, g2, g3, c, rho21


def speeds(triple, nu=None):
    """Characteristic speeds ``(C1, C2, C3)`` of the modulation system.

    ``triple`` is a ``RiemannTriple`` or ``(b1, b2, b3)`` together with ``nu``.
    """
    b1, b2, b3, nu = _unpack(triple, nu)
    if b1 - b2 < 1e-12 or b2 - b3 < 1e-12:
        raise DomainError("degenerate triple: use the edge limits")
    g1, g2, g3, c, _ = _speeds(b1, b2, b3, nu)
    return c + g1, c + g2, c + g3


def _unpack(triple, nu):
    if hasattr(triple, "b1"):
        return triple.b1, triple.b2, triple.b3, triple.nu if nu is None else nu
    b1, b2, b3 = triple
    if nu is None:
        raise TypeError("nu required for a plain tuple")
    return float(b1), float(b2), float(b3), float(nu)


# -- quadrature rules ------------------------------------------------------

def _gl(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


@lru_cache(maxsize=16)
def _double_rule(n, graded=0):
    """Nodes ``(m, psi, weight/pi)`` on ``[0,1] x [0,pi]`` for the q-average.

    ``psi = pi/2 - phi`` with ``lambda = sin(phi)``; the corner ``m = psi = 0``
    (argument equal to b3) carries a 1/r singularity of ``f'`` when b3 is
    near the hump minimum and is covered by two Duffy triangles.  ``graded``
    adds geometric sub-intervals in the Duffy radius down to ``4**-graded``.
    """
    blocks = []
    m, wm = _gl(n, 0.0, 1.0)
    ps, wp = _gl(n, 1.0, math.pi)
    M, P = np.meshgrid(m, ps, indexing="ij")
    blocks.append((M.ravel(), P.ravel(), np.outer(wm, wp).ravel()))
    if graded:
        edges = [0.0] + [4.0 ** -k for k in range(graded, 0, -1)] + [1.0]
        parts = [_gl(max(n // 3, 12), lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        r = np.concatenate([p[0] for p in parts])
        wr = np.concatenate([p[1] for p in parts])
    else:
        r, wr = _gl(n, 0.0, 1.0)
    s, ws = _gl(n, 0.0, 1.0)
    R, S = np.meshgrid(r, s, indexing="ij")
    W = (np.outer(wr, ws) * R).ravel()
    blocks.append((R.ravel(), (R * S).ravel(), W))
    blocks.append(((R * S).ravel(), R.ravel(), W))
    mm = np.concatenate([b[0] for b in blocks])
    pp = np.concatenate([b[1] for b in blocks])
    ww = np.concatenate([b[2] for b in blocks]) / math.pi
    return mm, np.cos(pp), ww


@lru_cache(maxsize=8)
def _single_rule(n):
    return _gl(n, 0.0, 1.0)


@lru_cache(maxsize=8)
def _corr_rule(n):
    sg, wsg = _gl(n, 0.0, 1.0)
    th, wth = _gl(n, 0.0, 0.5 * math.pi)
    SG, TH = np.meshgrid(sg, th, indexing="ij")
    return SG.ravel(), np.sin(TH).ravel() ** 2, np.outer(wsg, wth).ravel()


@dataclass(frozen=True)
class QFamily:
    """``Q(u, v) = q(u, v, v)`` and the derivatives used at the leading edge."""

    Q: float
    Qu: float
    Qv: float
    Phi: float
    Phiu: float
    Phiv: float
    Phivv: float
    Quv: float
    Qvv: float
    Quvv: float


class Modulation:
    """Modulation-theory toolkit for one initial datum.

    Holds quadrature settings and the leading-edge continuation cache.
    ``n_double`` is the Gauss-Legendre order per block of the q-average.
    """

    def __init__(self, datum: InitialDatum, n_double=80, n_single=160, n_corr=48):
        self.datum = datum
        self.prof = datum.profile
        self.nu = datum.nu
        self.umin = datum.profile.umin
        self.n_double = n_double
        self.n_single = n_single
        self.n_corr = n_corr
        self.tc, self.xc, self.uc = critical_point(datum)
        self._le_cache: list = []
        self._te_cache: list = []

    # -- q and derivatives ---------------------------------------------------
    def _rule_for(self, b3, n):
        h = b3 - self.umin
        graded = 0
        if h < 1e-3:
            graded = int(min(20, math.ceil(-math.log(max(h, 1e-24)) / (2 * math.log(4.0)))))
        return _double_rule(n, graded)

    def q_grad(self, b1, b2, b3, branch="minus", n=None):
        """``q`` and ``(d1 q, d2 q, d3 q)`` by differentiation under the integral."""
        n = n or self.n_double
        M, S, W = self._rule_for(b3, n)
        r = 0.5 * (1.0 + S) * b3 + 0.5 * (1.0 - S) * b2
        M2 = M * M
        a = (1.0 - M2) * r + M2 * b1
        f = self.prof.f_minus(a)
        fp = self.prof.f_minus_deriv(a, 1)
        q = np.dot(W, f)
        Wfp = W * fp
        d1 = np.dot(Wfp, M2)
        d2 = np.dot(Wfp, (1.0 - M2) * 0.5 * (1.0 - S))
        d3 = np.dot(Wfp, (1.0 - M2) * 0.5 * (1.0 + S))
        grad = np.array([d1, d2, d3])
        if branch == "plus":
            cq, cg = self._continuation(b1, b2, b3)
            q += cq
            grad = grad + cg
        elif branch != "minus":
            raise ValueError("branch must be 'minus' or 'plus'")
        return float(q), grad

    def _continuation(self, b1, b2, b3):
        """Branch-point term and its gradient for b3 on the increasing flank."""
        h = b3 - self.umin
        if h <= 0.0:
            return 0.0, np.zeros(3)
        SG, S2, W = _corr_rule(self.n_corr)
        a = self.umin + h * SG * SG
        a = np.maximum(a, np.nextafter(self.umin, 0.0))
        D = self.prof.f_minus(a) - self.prof.f_plus(a)
        Dp = self.prof.f_minus_deriv(a, 1) - self.prof.f_plus_deriv(a, 1)
        r = b3 - h * (1.0 - SG * SG) * S2
        e1 = b1 - r
        e2 = b2 - r
        G = 1.0 / np.sqrt(e1 * e2)
        pref = 2.0 / math.pi
        WG = W * SG * G
        val = pref * h * np.dot(WG, D)
        g1 = -0.5 * pref * h * np.dot(WG, D / e1)
        g2 = -0.5 * pref * h * np.dot(WG, D / e2)
        dr = 1.0 - (1.0 - SG * SG) * S2
        g3 = pref * (
            np.dot(WG, D)
            + h * np.dot(WG, Dp * SG * SG)
            + 0.5 * h * np.dot(WG, D * (1.0 / e1 + 1.0 / e2) * dr)
        )
        return float(val), np.array([g1, g2, g3])

    def q_function(self, triple, branch="minus", rtol=1e-9, nmax=640):
        """Phase shift ``q`` with order doubling until relative agreement ``rtol``."""
        b1, b2, b3, _ = _unpack(triple, self.nu)
        n = 40
        prev, _ = self.q_grad(b1, b2, b3, branch, n)
        while n < nmax:
            n *= 2
            cur, _ = self.q_grad(b1, b2, b3, branch, n)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                return cur
            prev = cur
        log.warning("q quadrature did not reach rtol=%g at n=%d", rtol, n)
        return cur

    def w_transport(self, triple, branch="minus"):
        b1, b2, b3, nu = _unpack(triple, self.nu)
        q, dq = self.q_grad(b1, b2, b3, branch)
        g1, g2, g3, c, _ = _speeds(b1, b2, b3, nu)
        return q + g1 * dq[0], q + g2 * dq[1], q + g3 * dq[2]

    def Qfamily(self, u, v):
        m, w = _single_rule(self.n_single)
        m2 = m * m
        a = v + m2 * (u - v)
        f = self.prof.f_minus(a)
        f1 = self.prof.f_minus_deriv(a, 1)
        f2 = self.prof.f_minus_deriv(a, 2)
        f3 = self.prof.f_minus_deriv(a, 3)
        om = 1.0 - m2
        return QFamily(
            Q=np.dot(w, f),
            Qu=np.dot(w, m2 * f1),
            Qv=np.dot(w, om * f1),
            Phi=np.dot(w, f1),
            Phiu=np.dot(w, m2 * f2),
            Phiv=np.dot(w, om * f2),
            Phivv=np.dot(w, om * om * f3),
            Quv=np.dot(w, m2 * om * f2),
            Qvv=np.dot(w, om * om * f2),
            Quvv=np.dot(w, m2 * om * om * f3),
        )

    # -- hodograph residuals -------------------------------------------------
    def _triple_from(self, y):
        b2, ell, w3 = y
        d12 = math.exp(ell)
        b3 = self.umin + w3 * w3
        return b2 + d12, b2, b3, d12, ("plus" if w3 < 0.0 else "minus")

    def hodograph_residual(self, y, x, t):
        """Nondegenerate hodograph system in the unknowns ``(b2, log(b1-b2), w3)``.

        ``F_i = (c t + q - x) + (C_i - c)(t + d_i q)`` combined as
        ``F1``, ``(F1 - F2)/(C1 - c)``, ``(F2 - F3)/(b2 - b3)`` so that
        neither edge degeneracy makes the Jacobian singular.
        """
        b1, b2, b3, d12, br = self._triple_from(y)
        d23 = b2 - b3
        if not (d23 > 0.0 and b3 + self.nu > 0.0 and b1 < 0.0):
            raise DomainError("ordering violated")
        q, dq = self.q_grad(b1, b2, b3, br)
        g1, g2, g3, c, rho21 = _speeds(b1, b2, b3, self.nu, d12, d23)
        base = c * t + q - x
        T = t + dq
        F1 = base + g1 * T[0]
        A2 = T[0] - rho21 * T[1]
        A3 = ((g2 - g3) * t + g2 * dq[1] - g3 * dq[2]) / d23
        return np.array([F1, A2, A3])

    def full_residual(self, triple, x, t, branch="minus"):
        """The three raw equations ``C_i t + w_i - x``."""
        b1, b2, b3, nu = _unpack(triple, self.nu)
        w = self.w_transport((b1, b2, b3), branch)
        C = speeds((b1, b2, b3), nu)
        return np.array([C[i] * t + w[i] - x for i in range(3)])

    # -- leading edge ----------------------------------------------------------
    def _le_eqs(self, u, v, t):
        F = self.Qfamily(u, v)
        nu = self.nu
        d = u - v
        G = 3.0 * t + F.Phi
        e2 = (d * (t + F.Qu) + (v + nu) * G) / d
        e3 = ((u - 2.0 * v - nu) * G + 2.0 * (v + nu) * d * F.Phiv) / d
        return np.array([e2, e3])

    def _le_start(self):
        """First nondegenerate point, parametrised by the gap ``d = u - v``."""
        d0 = 2e-3
        y = np.array([self.uc + 0.5 * d0, self.tc])

        def fun(y):
            return self._le_eqs(y[0], y[0] - d0, y[1])

        y = _newton(fun, y, tol=1e-13, scale=np.array([1.0, 1.0]))
        return y[1], y[0], y[0] - d0

    def leading_edge(self, t):
        """Leading-edge state at time ``t > t_c`` by continuation in time."""
        if t <= self.tc:
            raise DomainError(f"leading edge exists for t > t_c = {self.tc}")
        if not self._le_cache:
            self._le_cache.append(self._le_start())
        t0, u0, v0 = max((c for c in self._le_cache if c[0] <= t), key=lambda c: c[0], default=self._le_cache[0])
        if t < t0:
            # below the first cached point: solve in d directly
            t0, u0, v0 = self._le_cache[0]
        prev = None
        dt = min(1e-3 if t0 - self.tc < 1e-2 else 0.05, abs(t - t0)) or 0.0
        while t0 != t:
            t1 = t0 + dt if t > t0 else t0 - dt
            if (t > t0 and t1 > t) or (t < t0 and t1 < t):
                t1 = t
            guess = np.array([u0, u0 - v0])
            if prev is not None:
                tp, up, vp = prev
                s = (t1 - t0) / (t0 - tp)
                guess = np.array([u0 + s * (u0 - up), (u0 - v0) + s * ((u0 - v0) - (up - vp))])
            try:
                y = _newton(lambda y: self._le_eqs(y[0], y[0] - y[1], t1), guess, tol=1e-13)
                if not y[1] > 0.0:
                    raise ConvergenceError("gap collapsed")
            except (ConvergenceError, DomainError, FloatingPointError):
                dt *= 0.5
                if dt < 1e-8:
                    raise ConvergenceError(f"leading-edge continuation stalled at t={t0}")
                continue
            prev = (t0, u0, v0)
            t0, u0, v0 = t1, y[0], y[0] - y[1]
            dt = min(dt * 2.0, 0.05, max(t0 - self.tc, 1e-4))
        self._le_cache.append((t0, u0, v0))
        return self._le_state(t, u0, v0)

    def _le_state(self, t, u, v):
        nu = self.nu
        F = self.Qfamily(u, v)
        fp = self.prof.f_minus_deriv(u, 1)
        xm = (3.0 * u + 2.0 * nu) * t + self.prof.f_minus(u)
        G = 3.0 * t + F.Phi
        V = 4.0 * (v + nu) ** 2 * (u - v) ** 2 * F.Phivv - G * (
            8.0 * v * nu + 3.0 * u * u - 8.0 * u * v - 2.0 * u * nu + 3.0 * nu * nu + 8.0 * v * v
        )
        c = -V / (8.0 * (u + nu) * (v + nu) * (u - v))
        return LeadingEdgeState(t=t, xminus=xm, u=u, v=v, V=V, c=c, fprime=fp, Phi=F.Phi, nu=nu)

    # -- trailing edge ---------------------------------------------------------
    def _te_eqs(self, y, t):
        """Limit ``b1 = b2 = b`` of the hodograph system: ``t + d3 q = 0``, ``2t + d1 q + d2 q = 0``."""
        b, w3 = y
        a = self.umin + w3 * w3
        br = "plus" if w3 < 0.0 else "minus"
        _, dq = self.q_grad(b, b, a, br)
        return np.array([t + dq[2], 2.0 * t + dq[0] + dq[1]])

    def trailing_edge(self, t, guess=None):
        """Trailing edge ``(x+, b, a)`` where ``b1 = b2 = b`` and ``b3 = a`` is the Hopf value."""
        if guess is None:
            guess = self._te_guess(t)
        y = _newton(lambda y: self._te_eqs(y, t), np.asarray(guess, dtype=float), tol=1e-12)
        b, w3 = y
        a = self.umin + w3 * w3
        br = "plus" if w3 < 0.0 else "minus"
        q, _ = self.q_grad(b, b, a, br)
        xp = (2.0 * b + a + 2.0 * self.nu) * t + q
        return TrailingEdgeState(t=t, xplus=xp, b=b, a=a, branch=br, w3=w3)

    def _te_guess(self, t):
        """Continue the trailing edge in time from the breaking point.

        Near ``t_c`` the edge is started at a fixed small gap ``d = b - a``;
        there ``T3 - 2 T2`` is ``O(d)`` and is divided through by it.
        """
        if not self._te_cache:
            d = 1e-2

            def fun(y):
                b, tt = y
                _, g = self.q_grad(b, b, b - d, "minus")
                return np.array([tt + g[2], (g[0] + g[1] - 2.0 * g[2]) / d])

            b, t0 = _newton(fun, np.array([self.uc, self.tc]), tol=1e-12)
            self._te_cache.append((t0, np.array([b, math.sqrt(b - d - self.umin)])))
        t0, y = min(self._te_cache, key=lambda c: abs(c[0] - t))
        dt = 0.05
        while t0 != t:
            t1 = t0 + math.copysign(min(dt, abs(t - t0)), t - t0)
            try:
                y1 = _newton(lambda z: self._te_eqs(z, t1), y, tol=1e-12)
            except (ConvergenceError, DomainError):
                dt *= 0.5
                if dt < 1e-6:
                    raise ConvergenceError(f"trailing-edge continuation stalled at t={t0}")
                continue
            t0, y = t1, y1
            dt = min(2.0 * dt, 0.1)
        self._te_cache.append((t0, y))
        return y

    # -- zone ------------------------------------------------------------------
    def _first_interior(self, le, dx):
        t = le.t
        x = le.xminus + dx
        delta = math.sqrt(dx / le.c)
        Delta = dx / (3.0 * t + le.fprime)
        b1, b2, b3 = le.u + Delta, le.v + delta, le.v - delta
        y0 = np.array([b2, math.log(b1 - b2), math.sqrt(b3 - self.umin)])
        return self._solve_at(x, t, y0), x

    def _solve_at(self, x, t, guess):
        y0 = np.array(guess, dtype=float)
        return _newton(lambda y: self.hodograph_residual(y, x, t), y0, tol=1e-11)

    def solve_zone(self, t, xgrid=None, n=120):
        """Riemann invariants on a grid inside ``[x-, x+]``.

        Without ``xgrid`` a Chebyshev grid of ``n`` interior points clustered
        at both edges is used.  Points are solved in increasing x by
        continuation from the leading edge; each Newton solve starts from a
        secant prediction of the previous two points.
        """
        le = self.leading_edge(t)
        te = self.trailing_edge(t)
        xm, xp = le.xminus, te.xplus
        if xgrid is None:
            k = np.arange(1, n + 1)
            xgrid = xm + (xp - xm) * 0.5 * (1.0 - np.cos(math.pi * k / (n + 1)))
        xgrid = np.asarray(xgrid, dtype=float)
        order = np.argsort(xgrid)
        inside = (xgrid[order] > xm) & (xgrid[order] < xp)
        xs = xgrid[order][inside]
        B = np.full((xgrid.size, 3), np.nan)
        branch = np.array(["minus"] * xgrid.size, dtype=object)
        ys = []
        if xs.size:
            dx0 = min(1e-4, 0.5 * (xs[0] - xm))
            y, x = self._first_interior(le, dx0)
            hist = [(x, y)]
            for xi in xs:
                y = self._march(hist, xi, t)
                hist.append((xi, y))
                if len(hist) > 3:
                    hist.pop(0)
                ys.append(y)
        idx_inside = order[inside]
        for j, y in zip(idx_inside, ys):
            b1, b2, b3, _, br = self._triple_from(y)
            B[j] = (b1, b2, b3)
            branch[j] = br
        return WhithamSolution(t=t, xgrid=xgrid, triples=B, branch=branch, xminus=xm, xplus=xp, leading=le, trailing=te, nu=self.nu)

    def _march(self, hist, x, t):
        """Solve at x from the history, subdividing the step when Newton fails."""
        x0, y0 = hist[-1]
        target = x
        pts = list(hist)
        while True:
            xa, ya = pts[-1]
            if len(pts) >= 2:
                xb, yb = pts[-2]
                s = (target - xa) / (xa - xb) if xa != xb else 0.0
                guess = ya + s * (ya - yb)
                # trailing-edge log gap: keep the predictor from over-shooting
                guess[1] = min(guess[1], ya[1] + 1.0) if s > 0 else guess[1]
            else:
                guess = ya
            try:
                y = _newton(lambda y: self.hodograph_residual(y, target, t), guess, tol=1e-11)
            except (ConvergenceError, DomainError, FloatingPointError, ValueError):
                try:
                    y = _newton(lambda y: self.hodograph_residual(y, target, t), ya, tol=1e-11)
                except (ConvergenceError, DomainError, FloatingPointError, ValueError):
                    mid = 0.5 * (xa + target)
                    if abs(target - xa) < 1e-10:
                        raise ConvergenceError(f"hodograph continuation stalled at x={xa}")
                    # recurse on the half step
                    pts.append((mid, self._march(pts, mid, t)))
                    continue
            if x == target:
                return y
            pts.append((target, y))
            target = x


def _newton(fun, y0, tol=1e-12, maxit=40, scale=None):
    """Damped Newton with a forward-difference Jacobian."""
    y = np.array(y0, dtype=float)
    with np.errstate(all="raise"):
        try:
            F = np.asarray(fun(y))
        except (FloatingPointError, DomainError, ValueError) as exc:
            raise ConvergenceError(f"residual undefined at start: {exc}")
        nF = np.max(np.abs(F))
        for _ in range(maxit):
            if nF < tol:
                return y
            n = y.size
            J = np.empty((F.size, n))
            for j in range(n):
                h = 1e-7 * max(1.0, abs(y[j]))
                yh = y.copy()
                yh[j] += h
                try:
                    J[:, j] = (np.asarray(fun(yh)) - F) / h
                except (FloatingPointError, DomainError, ValueError):
                    yh[j] = y[j] - h
                    J[:, j] = (F - np.asarray(fun(yh))) / h
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                raise ConvergenceError("singular Jacobian", nF)
            lam = 1.0
            while lam > 1e-4:
                yt = y + lam * step
                try:
                    Ft = np.asarray(fun(yt))
                    nt = np.max(np.abs(Ft))
                    if np.isfinite(nt) and nt < (1.0 - 1e-4 * lam) * nF or nt < tol:
                        break
                except (FloatingPointError, DomainError, ValueError):
                    pass
                lam *= 0.5
            else:
                if nF < 1e3 * tol:
                    return y  # stagnated at the round-off floor
                raise ConvergenceError("line search failed", nF)
            y, F, nF = yt, Ft, nt
            if np.max(np.abs(lam * step)) < 1e-15 * max(1.0, np.max(np.abs(y))) and nF < 1e3 * tol:
                return y
        if nF < 1e3 * tol:
            return y
        raise ConvergenceError("Newton did not converge", nF)


@dataclass(frozen=True)
class LeadingEdgeState:
    """Leading edge ``x-(t)``: Hopf value ``u``, degenerate invariant ``v``, ``V`` and ``c``."""

    t: float
    xminus: float
    u: float
    v: float
    V: float
    c: float
    fprime: float
    Phi: float
    nu: float

    def derivatives(self):
        """Closed-form time derivatives ``(x-_t, u_t, v_t)``."""
        u, v, nu, t = self.u, self.v, self.nu, self.t
        ut = -2.0 * (u - v) * (u + 2.0 * v + 3.0 * nu) / ((u + nu) * (3.0 * t + self.fprime))
        vt = -4.0 * (u - 3.0 * nu - 4.0 * v) * (v + nu) * (u - v) / self.V
        xt = 3.0 * u + 2.0 * nu + (3.0 * t + self.fprime) * ut
        return xt, ut, vt


@dataclass(frozen=True)
class TrailingEdgeState:
    t: float
    xplus: float
    b: float
    a: float
    branch: str
    w3: float


@dataclass
class WhithamSolution:
    """Riemann invariants on ``xgrid``; rows outside ``(x-, x+)`` are NaN."""

    t: float
    xgrid: np.ndarray
    triples: np.ndarray
    branch: np.ndarray
    xminus: float
    xplus: float
    leading: LeadingEdgeState
    trailing: TrailingEdgeState
    nu: float

    def hyperbolicity_crossings(self):
        """Positions where ``C2 - C3`` changes sign (non-strict hyperbolicity)."""
        C = self.speeds()
        ok = np.all(np.isfinite(C), axis=1)
        x = self.xgrid[ok]
        d = C[ok, 1] - C[ok, 2]
        o = np.argsort(x)
        x, d = x[o], d[o]
        k = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0]
        return x[k] - d[k] * (x[k + 1] - x[k]) / (d[k + 1] - d[k])

    def speeds(self):
        out = np.full_like(self.triples, np.nan)
        for i, b in enumerate(self.triples):
            if np.all(np.isfinite(b)):
                out[i] = speeds(tuple(b), self.nu)
        return out


# -- module-level conveniences ---------------------------------------------------

_TOOLKITS: dict = {}


def _profile_key(prof):
    amp = getattr(prof, "amp", None)
    if getattr(prof, "name", None) == "sech2" and amp is not None:
        return ("sech2", amp)
    return ("id", id(prof))


def _toolkit(datum):
    """Shared :class:`Modulation` per (profile, nu); independent of eps."""
    key = (_profile_key(datum.profile), datum.nu)
    hit = _TOOLKITS.get(key)
    if hit is None or hit[0] is not datum.profile and key[0][0] == "id":
        # keep a reference to the profile so its id cannot be recycled
        hit = _TOOLKITS[key] = (datum.profile, Modulation(datum))
    return hit[1]


def q_function(datum, triple, branch="minus", rtol=1e-9):
    return _toolkit(datum).q_function(triple, branch, rtol)


def w_transport(datum, triple, branch="minus"):
    return _toolkit(datum).w_transport(triple, branch)


def leading_edge(datum, t):
    return _toolkit(datum).leading_edge(t)


def trailing_edge(datum, t):
    return _toolkit(datum).trailing_edge(t)


def solve_zone(datum, t, xgrid=None, n=120):
    return _toolkit(datum).solve_zone(t, xgrid, n)


def edge_gap_laws(state: LeadingEdgeState, x):
    """Near-edge gaps ``(delta, Delta)``: ``delta = sqrt((x - x-)/c)``, ``Delta = (x - x-)/(3t + f_-'(u))``."""
    dx = np.asarray(x, dtype=float) - state.xminus
    if np.any(dx < 0.0):
        raise DomainError("edge laws hold for x >= x-")
    delta = np.sqrt(dx / state.c)
    Delta = dx / (3.0 * state.t + state.fprime)
    if np.ndim(x) == 0:
        return float(delta), float(Delta)
    return delta, Delta
