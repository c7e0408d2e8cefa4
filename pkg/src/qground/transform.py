"""The change of variables between the quasilinear and semilinear problems.

With coupling delta > 0, v = h(u) turns the quasilinear equation into
-Delta v = f_omega(v).  The forward map has the closed form

    h(t) = t*sqrt(1 + 2*delta*t^2)/2 + asinh(sqrt(2*delta)*t)/(2*sqrt(2*delta))

whose derivative is h'(t) = sqrt(1 + 2*delta*t^2), so the inverse r = h^{-1}
satisfies r'(s) = 1/sqrt(1 + 2*delta*r(s)^2), r(0) = 0, extended to s < 0 as
an odd function.  r is evaluated by a safeguarded Newton iteration on
h(x) = s; the negative branch always goes through sign symmetry.

The dual nonlinearity is f_omega(s) = r'(s) * P_omega(r(s)) with
P_omega(tau) = |tau|^(p-1)*tau - omega*tau, its primitive is
F_omega(s) = |r(s)|^(p+1)/(p+1) - omega*r(s)^2/2, and

    f_omega'(s) = r''(s)*P_omega(r(s)) + r'(s)^2 * P_omega'(r(s)),
    r''(s) = -2*delta*r(s)*r'(s)^4.

delta = 0 degenerates to the identity transform (r(s) = s), which serves as
the plain-NLS oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NoConvergence


@dataclass(frozen=True)
class TransformContext:
    """Coupling plus Newton controls for evaluating the inverse map r."""

    delta: float
    newton_tol: float = 1e-14
    max_newton_iter: int = 60

    def __post_init__(self):
        if self.delta < 0:
            raise InvalidParams("delta must be >= 0 (0 selects the NLS oracle)")
        if not (0 < self.newton_tol <= 1e-8):
            raise InvalidParams("newton_tol must lie in (0, 1e-8]")

    @property
    def is_identity(self) -> bool:
        return self.delta == 0.0


def h(t, ctx: TransformContext):
    """Forward map h(t); strictly increasing with h(0) = 0 and h(t) >= t."""
    t = np.asarray(t, dtype=float)
    if ctx.is_identity:
        out = t
    else:
        d = ctx.delta
        s2d = math.sqrt(2.0 * d)
        out = 0.5 * t * np.sqrt(1.0 + 2.0 * d * t * t) \
            + np.arcsinh(s2d * t) / (2.0 * s2d)
    return out if np.ndim(out) else float(out)


def _h_scalar(x: float, d: float) -> float:
    s2d = math.sqrt(2.0 * d)
    return 0.5 * x * math.sqrt(1.0 + 2.0 * d * x * x) \
        + math.asinh(s2d * x) / (2.0 * s2d)


def r_scalar(s: float, ctx: TransformContext) -> float:
    """Scalar Newton inversion of h; safeguarded by the bracket [0, |s|]."""
    if ctx.is_identity or s == 0.0:
        return float(s)
    sign = 1.0
    if s < 0.0:
        sign, s = -1.0, -s
    d = ctx.delta
    # r(s) <= s always; (2/d)^(1/4)*sqrt(s) is the large-s asymptote
    x = min(s, (2.0 / d) ** 0.25 * math.sqrt(s))
    lo, hi = 0.0, s
    tol = ctx.newton_tol
    for _ in range(ctx.max_newton_iter):
        f = _h_scalar(x, d) - s
        if f > 0.0:
            hi = x
        else:
            lo = x
        step = f / math.sqrt(1.0 + 2.0 * d * x * x)
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, xn):
            return sign * xn
        x = xn
    raise NoConvergence(f"Newton inversion of h stalled at s = {sign * s}")


def r(s, ctx: TransformContext):
    """Inverse map r = h^{-1}, odd on all of R; |r(s)| <= |s|."""
    if np.ndim(s) == 0:
        return r_scalar(float(s), ctx)
    s = np.asarray(s, dtype=float)
    if ctx.is_identity:
        return s.copy()
    d = ctx.delta
    sign = np.sign(s)
    a = np.abs(s)
    x = np.minimum(a, (2.0 / d) ** 0.25 * np.sqrt(a))
    lo = np.zeros_like(a)
    hi = a.copy()
    s2d = math.sqrt(2.0 * d)
    active = a > 0
    for _ in range(ctx.max_newton_iter):
        if not active.any():
            break
        f = 0.5 * x * np.sqrt(1.0 + 2.0 * d * x * x) \
            + np.arcsinh(s2d * x) / (2.0 * s2d) - a
        np.copyto(hi, x, where=active & (f > 0))
        np.copyto(lo, x, where=active & (f <= 0))
        xn = x - f / np.sqrt(1.0 + 2.0 * d * x * x)
        bad = (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= ctx.newton_tol * np.maximum(1.0, xn)
        x = np.where(active, xn, x)
        active &= ~done
    if active.any():
        raise NoConvergence("vectorized Newton inversion of h stalled")
    return sign * x


def r_prime(s, ctx: TransformContext):
    """r'(s) = (1 + 2*delta*r(s)^2)^(-1/2); lies in (0, 1]."""
    rr = r(s, ctx)
    out = 1.0 / np.sqrt(1.0 + 2.0 * ctx.delta * np.square(rr))
    return out if np.ndim(out) else float(out)


def r_second(s, ctx: TransformContext):
    """r''(s) = -2*delta*r(s)*r'(s)^4; nonpositive for s >= 0."""
    rr = r(s, ctx)
    rp = 1.0 / np.sqrt(1.0 + 2.0 * ctx.delta * np.square(rr))
    out = -2.0 * ctx.delta * rr * rp ** 4
    return out if np.ndim(out) else float(out)


def f_omega(s, omega: float, p: float, ctx: TransformContext):
    """Dual nonlinearity f_omega(s) = r'(s) * (|r|^(p-1) r - omega r)(s)."""
    rr = r(s, ctx)
    rp = 1.0 / np.sqrt(1.0 + 2.0 * ctx.delta * np.square(rr))
    out = rp * (np.abs(rr) ** (p - 1.0) * rr - omega * rr)
    return out if np.ndim(out) else float(out)


def F_omega(s, omega: float, p: float, ctx: TransformContext):
    """Primitive of f_omega: |r(s)|^(p+1)/(p+1) - omega*r(s)^2/2."""
    rr = r(s, ctx)
    out = np.abs(rr) ** (p + 1.0) / (p + 1.0) - 0.5 * omega * np.square(rr)
    return out if np.ndim(out) else float(out)


def f_omega_prime(s, omega: float, p: float, ctx: TransformContext):
    """f_omega'(s) = r'' P_omega(r) + (r')^2 P_omega'(r)."""
    rr = r(s, ctx)
    rp2 = 1.0 / (1.0 + 2.0 * ctx.delta * np.square(rr))
    rp = np.sqrt(rp2)
    rpp = -2.0 * ctx.delta * rr * rp2 * rp2
    p_val = np.abs(rr) ** (p - 1.0) * rr - omega * rr
    p_der = p * np.abs(rr) ** (p - 1.0) - omega
    out = rpp * p_val + rp2 * p_der
    return out if np.ndim(out) else float(out)


def s_star(omega: float, p: float, ctx: TransformContext) -> float:
    """Positive zero of F_omega: solves r(s*)^(p-1) = (p+1)*omega/2.

    F_omega < 0 on (0, s*) and > 0 beyond; trajectories started at or below
    s* can never reach zero, which makes s* the natural lower shooting
    bracket.  Returns 0 for omega = 0 (F_0 > 0 everywhere).
    """
    if omega == 0.0:
        return 0.0
    tau = ((p + 1.0) * omega / 2.0) ** (1.0 / (p - 1.0))
    return float(h(tau, ctx))


def make_scalar_f_omega(omega: float, p: float, ctx: TransformContext):
    """Fast scalar closure for ODE right-hand sides (pure math ops)."""
    if ctx.is_identity:
        pm1 = p - 1.0

        def f_nls(s: float) -> float:
            return abs(s) ** pm1 * s - omega * s

        return f_nls

    d = ctx.delta
    tol = ctx.newton_tol
    maxit = ctx.max_newton_iter
    quarter = (2.0 / d) ** 0.25
    s2d = math.sqrt(2.0 * d)
    pm1 = p - 1.0

    def f(s: float) -> float:
        if s == 0.0:
            return 0.0
        sign = 1.0
        if s < 0.0:
            sign, s = -1.0, -s
        x = min(s, quarter * math.sqrt(s))
        lo, hi = 0.0, s
        for _ in range(maxit):
            root = math.sqrt(1.0 + 2.0 * d * x * x)
            g = 0.5 * x * root + math.asinh(s2d * x) / (2.0 * s2d) - s
            if g > 0.0:
                hi = x
            else:
                lo = x
            xn = x - g / root
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
            if abs(xn - x) <= tol * max(1.0, xn):
                x = xn
                break
            x = xn
        rp = 1.0 / math.sqrt(1.0 + 2.0 * d * x * x)
        return sign * rp * (x ** pm1 * x - omega * x)

    return f
