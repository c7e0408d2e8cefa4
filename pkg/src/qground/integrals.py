"""Radial quadrature with explicit tail corrections, and the scalar
functionals entering the identities: mass M, Dirichlet energy T, the
quasilinear gradient integral Q_grad, the potential term P, beta = P/T,
the energy E, and the variational level m_omega.

Every integral is Simpson on the grid (taken in the uniform stretching
parameter, so the weights keep fourth order) plus a closed-form
contribution from the fitted decay beyond R_max.  Raw truncation is never
used silently: integrands whose tails do not converge raise Divergent,
which is how the low-dimension mass blow-up of the zero-mass limit shows
up in practice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import exp1, gammaincc
from scipy.special import gamma as gamma_fn

from . import transform
from .errors import ConstraintViolated, Divergent, InvalidParams
from .params import (DECAY_EXPONENTIAL, DECAY_NONE, DECAY_POWER, Decay,
                     Params, RadialGrid, RadialProfile, classify)


def sphere_area(dim: int) -> float:
    """Surface measure |S^{N-1}| = 2 pi^{N/2} / Gamma(N/2)."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma_fn(dim / 2.0)


def sobolev_constant(dim: int) -> float:
    """Best constant of the critical Sobolev embedding on R^N, N >= 3.

    This is the infimum of |grad w|_2^2 / |w|_{2*}^2, attained by the
    explicit bubble profile; closed form pi*N*(N-2)*(Gamma(N/2)/Gamma(N))^(2/N).
    """
    if dim < 3:
        raise InvalidParams("the critical Sobolev constant needs N >= 3")
    return math.pi * dim * (dim - 2) \
        * (gamma_fn(dim / 2.0) / gamma_fn(float(dim))) ** (2.0 / dim)


def upper_gamma(a: float, x: float) -> float:
    """Generalized upper incomplete gamma Gamma(a, x) for any real a, x > 0.

    For a <= 0 the value is obtained from the upward recurrence
    Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a, with Gamma(0, x) = E_1(x).
    """
    if x <= 0:
        raise ValueError("upper_gamma needs x > 0")
    if a > 0:
        return float(gammaincc(a, x) * gamma_fn(a))
    if a == 0:
        return float(exp1(x))
    return (upper_gamma(a + 1.0, x) - x ** a * math.exp(-x)) / a


def integrate_radial(values: np.ndarray, grid: RadialGrid, dim: int,
                     tail: float = 0.0) -> float:
    """Integrate f over R^N given node values of a radial f.

    Composite Simpson in the uniform grid parameter with weight
    |S^{N-1}| rho^{N-1} * drho/dxi, plus the supplied closed-form tail
    contribution for [R_max, infinity).
    """
    integrand = np.asarray(values) * grid.nodes ** (dim - 1) * grid.jacobian
    core = simpson(integrand, dx=grid.dxi)
    return sphere_area(dim) * float(core) + tail


# ---------------------------------------------------------------------------
# closed-form tail moments
# ---------------------------------------------------------------------------

def tail_moment(decay: Optional[Decay], dim: int, k: float, j: float,
                r_from: float) -> float:
    """Closed form of |S^{N-1}| * int_{r_from}^inf rho^{N-1+j} u_tail(rho)^k drho.

    j shifts the radial power (derivative cross terms need j in {-1, -2}).
    Raises Divergent when the power-law tail integral does not converge.
    """
    if decay is None or decay.kind == DECAY_NONE:
        return 0.0
    area = sphere_area(dim)
    if decay.kind == DECAY_EXPONENTIAL:
        c = k * decay.rate
        m = dim - 1 + j - k * (dim - 1) / 2.0
        x = c * r_from
        if x > 600.0:           # e^{-x} underflows; contribution is nil
            return 0.0
        return area * decay.amplitude ** k * c ** (-(m + 1.0)) \
            * upper_gamma(m + 1.0, x)
    if decay.kind == DECAY_POWER:
        e = dim - 1 + j - k * decay.exponent
        if e >= -1.0:
            raise Divergent(
                f"power tail rho^-{decay.exponent} makes the k={k} moment "
                f"diverge in dimension {dim}")
        return area * decay.amplitude ** k * r_from ** (e + 1.0) / (-(e + 1.0))
    raise ValueError(f"unknown decay kind {decay.kind!r}")


def _derivative_tail(decay: Optional[Decay], dim: int, k_val: float,
                     r_from: float) -> float:
    """Tail of int u^(k_val-2) * (u')^2 dx from the analytic decay form."""
    if decay is None or decay.kind == DECAY_NONE:
        return 0.0
    if decay.kind == DECAY_EXPONENTIAL:
        # u' = -(kappa + (N-1)/(2 rho)) u
        kap, nm1 = decay.rate, dim - 1
        return (kap ** 2 * tail_moment(decay, dim, k_val, 0.0, r_from)
                + kap * nm1 * tail_moment(decay, dim, k_val, -1.0, r_from)
                + 0.25 * nm1 ** 2 * tail_moment(decay, dim, k_val, -2.0, r_from))
    # u' = -q u / rho
    return decay.exponent ** 2 * tail_moment(decay, dim, k_val, -2.0, r_from)


# ---------------------------------------------------------------------------
# profile functionals
# ---------------------------------------------------------------------------

def profile_moment(profile: RadialProfile, k: float, dim: int) -> float:
    """int |u|^k dx with the tail of the fitted decay."""
    tail = tail_moment(profile.decay, dim, k, 0.0, profile.grid.r_max)
    return integrate_radial(np.abs(profile.values) ** k, profile.grid, dim, tail)


def dirichlet_integral(profile: RadialProfile, dim: int) -> float:
    """int |grad u|^2 dx = |S^{N-1}| int (u')^2 rho^{N-1} drho + tail."""
    tail = _derivative_tail(profile.decay, dim, 2.0, profile.grid.r_max)
    return integrate_radial(profile.derivative_values ** 2, profile.grid, dim, tail)


def quasi_gradient_integral(profile: RadialProfile, dim: int) -> float:
    """int u^2 |grad u|^2 dx, the quasilinear gradient integral."""
    tail = _derivative_tail(profile.decay, dim, 4.0, profile.grid.r_max)
    values = profile.values ** 2 * profile.derivative_values ** 2
    return integrate_radial(values, profile.grid, dim, tail)


def grad_square_norm(profile: RadialProfile, dim: int) -> float:
    """int |grad(u^2)|^2 dx = 4 * int u^2 |grad u|^2 dx."""
    return 4.0 * quasi_gradient_integral(profile, dim)


# ---------------------------------------------------------------------------
# diagnostics and identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarDiagnostics:
    """Scalar functionals of a solved ground state.

    mass is None when the decay law makes int u^2 divergent (zero-mass
    profiles in dimensions 3 and 4).  m_omega and m_star are None outside
    their domain of definition (N = 2, respectively non-critical p).
    """

    mass: Optional[float]
    dirichlet: float
    quasi_grad: float
    potential: float
    beta: float
    energy: float
    m_omega: Optional[float] = None
    m_star: Optional[float] = None
    delta_omega: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "mass": self.mass,
            "dirichlet": self.dirichlet,
            "quasi_grad": self.quasi_grad,
            "potential": self.potential,
            "beta": self.beta,
            "energy": self.energy,
            "m_omega": self.m_omega,
            "m_star": self.m_star,
            "delta_omega": self.delta_omega,
        }


def energy_functional(dirichlet: float, quasi_grad: float, potential: float,
                      params: Params) -> float:
    """E(u) = T/2 + delta * Q_grad - P/(p+1)."""
    return 0.5 * dirichlet + params.delta * quasi_grad \
        - potential / (params.p + 1.0)


def compute_diagnostics(u: RadialProfile, params: Params,
                        v: Optional[RadialProfile] = None) -> ScalarDiagnostics:
    """All scalar functionals of a ground-state profile u (and v = h(u))."""
    dim = params.dim
    try:
        mass: Optional[float] = profile_moment(u, 2.0, dim)
    except Divergent:
        mass = None
    dirichlet = dirichlet_integral(u, dim)
    quasi = quasi_gradient_integral(u, dim)
    potential = profile_moment(u, params.p + 1.0, dim)
    beta = potential / dirichlet
    energy = energy_functional(dirichlet, quasi, potential, params)
    m_omega = m_star = delta_omega = None
    if dim >= 3 and v is not None:
        m_omega = level_m_omega(v, params)
        if classify(params).is_critical:
            m_star = sobolev_constant(dim)
            delta_omega = m_omega - m_star
    return ScalarDiagnostics(mass=mass, dirichlet=dirichlet, quasi_grad=quasi,
                             potential=potential, beta=beta, energy=energy,
                             m_omega=m_omega, m_star=m_star,
                             delta_omega=delta_omega)


def pohozaev_residual(u: RadialProfile, params: Params,
                      diagnostics: Optional[ScalarDiagnostics] = None) -> float:
    """Relative residual of the Pohozaev identity, normalized by T.

    (N-2)/(2N) T + (N-2)/N delta Q_grad - P/(p+1) + omega/2 M = 0.
    In dimension 2 the gradient terms drop out; for omega = 0 the mass term
    is absent (it need not even be finite).
    """
    d = diagnostics or compute_diagnostics(u, params)
    n = params.dim
    res = (n - 2) / (2.0 * n) * d.dirichlet \
        + (n - 2) / n * params.delta * d.quasi_grad \
        - d.potential / (params.p + 1.0)
    if params.omega > 0:
        if d.mass is None:
            raise Divergent("Pohozaev needs a finite mass when omega > 0")
        res += 0.5 * params.omega * d.mass
    return abs(res) / d.dirichlet


def nehari_residual(u: RadialProfile, params: Params,
                    diagnostics: Optional[ScalarDiagnostics] = None) -> float:
    """Relative residual of the Nehari identity, normalized by T.

    T/2 + 2 delta Q_grad - P/2 + omega/2 M = 0.
    """
    d = diagnostics or compute_diagnostics(u, params)
    res = 0.5 * d.dirichlet + 2.0 * params.delta * d.quasi_grad \
        - 0.5 * d.potential
    if params.omega > 0:
        if d.mass is None:
            raise Divergent("Nehari needs a finite mass when omega > 0")
        res += 0.5 * params.omega * d.mass
    return abs(res) / d.dirichlet


def critical_key_residual(u: RadialProfile, params: Params,
                          diagnostics: Optional[ScalarDiagnostics] = None) -> float:
    """Relative residual of delta Q_grad = omega M / (N-2) (critical p only)."""
    d = diagnostics or compute_diagnostics(u, params)
    if d.mass is None:
        raise Divergent("critical key estimate needs a finite mass")
    lhs = params.delta * d.quasi_grad
    rhs = params.omega * d.mass / (params.dim - 2)
    return abs(lhs - rhs) / max(abs(rhs), abs(lhs))


def level_m_omega(v: RadialProfile, params: Params,
                  cross_check_tol: float = 1e-6) -> float:
    """Variational level m_omega recovered from the solution v of the dual
    problem via m_omega = (2* int F_omega(v))^(2/N).

    The Pohozaev identity for the dual problem forces
    int |grad v|^2 = 2* int F_omega(v); the two routes must agree to
    cross_check_tol or the solve is rejected (ConstraintViolated).
    """
    if params.dim < 3:
        raise InvalidParams("the variational level uses 2*, so needs N >= 3")
    ctx = transform.TransformContext(params.delta)
    f_vals = transform.F_omega(v.values, params.omega, params.p, ctx)
    tail = 0.0
    if v.decay is not None and v.decay.kind != DECAY_NONE:
        # F_omega(s) ~ |s|^{p+1}/(p+1) - omega s^2 / 2 for small s
        tail = tail_moment(v.decay, params.dim, params.p + 1.0, 0.0,
                           v.grid.r_max) / (params.p + 1.0)
        if params.omega > 0:
            tail -= 0.5 * params.omega * tail_moment(
                v.decay, params.dim, 2.0, 0.0, v.grid.r_max)
    int_f = integrate_radial(f_vals, v.grid, params.dim, tail)
    two_star = params.two_star()
    dirichlet = dirichlet_integral(v, params.dim)
    rel = abs(dirichlet - two_star * int_f) / dirichlet
    if rel > cross_check_tol:
        raise ConstraintViolated(
            f"dual Pohozaev cross-check failed: |T_v - 2* int F| / T_v = {rel:.3e}")
    return float((two_star * int_f) ** (2.0 / params.dim))


# ---------------------------------------------------------------------------
# appendix property checks
# ---------------------------------------------------------------------------

def radial_decay_check(u: RadialProfile, s: float, dim: int,
                       slack: float = 1e-9) -> bool:
    """Pointwise bound |u(x)| <= C_{N,s} |u|_{L^s} |x|^{-N/s} for radial
    nonincreasing u, with C_{N,s} = (N / |S^{N-1}|)^{1/s}.

    Returns False when u is not nonincreasing (the bound presumes it).
    """
    if not u.is_positive_decreasing():
        return False
    norm_s = profile_moment(u, s, dim) ** (1.0 / s)
    c = (dim / sphere_area(dim)) ** (1.0 / s)
    rho = u.grid.nodes[1:]
    bound = c * norm_s * rho ** (-dim / s)
    return bool(np.all(np.abs(u.values[1:]) <= bound * (1.0 + slack)))


def gn_ratio(u: RadialProfile, q: float, s: float, dim: int) -> float:
    """Fitted constant of the Gagliardo-Nirenberg-type inequality for u^2:

        int |u|^q <= C (int u^2 |grad u|^2)^(theta N/(N-2)) (int |u|^s)^(1-theta)

    with theta = (N-2)(q-s) / (2s + N(4-s)).  Returns the ratio lhs/rhs,
    i.e. the smallest admissible C for this profile.

    The gradient-term exponent theta*N/(N-2) is forced by scale invariance:
    it is the unique power for which both sides respond identically to
    u -> s*u(./lambda), which is also what the classical inequality applied
    to u^2 produces.
    """
    limit = 4.0 * dim / (dim - 2)
    if not (2 <= s < limit and s < q < limit):
        raise InvalidParams("gn_ratio needs 2 <= s < q < 4N/(N-2)")
    theta = (dim - 2) * (q - s) / (2 * s + dim * (4 - s))
    lhs = profile_moment(u, q, dim)
    quasi = quasi_gradient_integral(u, dim)
    norm_s = profile_moment(u, s, dim)
    rhs = quasi ** (theta * dim / (dim - 2)) * norm_s ** (1.0 - theta)
    return lhs / rhs


def gn_check(u: RadialProfile, q: float, s: float, dim: int,
             constant: Optional[float] = None) -> bool:
    """True iff the inequality holds with the supplied constant (or, when
    none is given, iff the fitted ratio is finite and positive)."""
    ratio = gn_ratio(u, q, s, dim)
    if constant is None:
        return bool(np.isfinite(ratio) and ratio > 0)
    return bool(ratio <= constant)


def moser_bound_check(heights: list[tuple[float, float]],
                      transient_fraction: float = 0.3,
                      slack: float = 1e-6) -> bool:
    """Uniform sup-bound check for a family of dual-problem minimizers.

    `heights` holds (omega, sup-norm) pairs.  The family passes when every
    sup-norm is finite and, past the transient head of the ladder, the
    sup-norm does not increase as omega decreases.
    """
    if not heights:
        return False
    pairs = sorted(heights, key=lambda t: -t[0])   # decreasing omega
    values = np.array([h for _, h in pairs], dtype=float)
    if not np.all(np.isfinite(values)):
        return False
    start = int(len(values) * transient_fraction)
    tail = values[start:]
    return bool(np.all(np.diff(tail) <= slack * np.abs(tail[:-1])))
