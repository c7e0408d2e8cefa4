"""Independent oracles for expected-value generation.

Everything here deliberately avoids the package's own solver path: the
NLS ground state is shot with a different integrator (Radau), a fixed
domain and its own bisection; integrals use adaptive quadrature on the
dense trajectory.  Frozen constants in the tests were produced by these
routines; rerun `python tests/oracle.py` to regenerate them.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad, solve_ivp


def nls_shoot(dim: int, p: float, height: float, r_end: float = 30.0):
    def rhs(rho, y):
        return (y[1], -(dim - 1) / rho * y[1] - (abs(y[0]) ** (p - 1) * y[0]
                                                 - y[0]))

    def cross(rho, y):
        return y[0]
    cross.terminal, cross.direction = True, -1

    def turn(rho, y):
        return y[1]
    turn.terminal, turn.direction = True, 1

    r0 = 1e-6
    f0 = height ** p - height
    y0 = [height - f0 * r0 ** 2 / (2 * dim), -f0 * r0 / dim]
    return solve_ivp(rhs, (r0, r_end), y0, method="Radau", rtol=1e-12,
                     atol=1e-14, events=[cross, turn], dense_output=True)


def nls_height(dim: int, p: float) -> float:
    """Q(0) by bisection at relative tolerance 1e-13."""
    lo, hi = 1.0, 2.0
    while True:
        sol = nls_shoot(dim, p, hi)
        if sol.t_events[0].size:
            break
        lo = hi
        hi *= 2.0
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        sol = nls_shoot(dim, p, mid)
        if sol.t_events[0].size:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def nls_profile_integral(dim: int, p: float, kind: str) -> float:
    """Integrals of Q over R^N by adaptive quadrature plus exponential tail.

    kind: "mass" = int Q^2, "grad_sq" = int |grad(Q^2)|^2.
    """
    from scipy.special import gamma

    height = nls_height(dim, p)
    sol = nls_shoot(dim, p, height)
    # trust the trajectory down to Q ~ 1e-8 * Q(0); beyond, pure decay
    ts = sol.t
    vals = sol.sol(ts)[0]
    cut_idx = np.argmax(vals < 1e-8 * height)
    rho_m = ts[cut_idx] if cut_idx > 0 else ts[-1]
    q_m, qp_m = (float(x) for x in sol.sol(rho_m))
    amp = q_m * rho_m ** ((dim - 1) / 2.0) * np.exp(rho_m)

    def q_of(rho):
        if rho <= rho_m:
            return float(sol.sol(rho)[0])
        return amp * rho ** (-(dim - 1) / 2.0) * np.exp(-rho)

    def qp_of(rho):
        if rho <= rho_m:
            return float(sol.sol(rho)[1])
        return -(1.0 + (dim - 1) / (2.0 * rho)) * q_of(rho)

    if kind == "mass":
        integrand = lambda rho: q_of(rho) ** 2 * rho ** (dim - 1)
    elif kind == "grad_sq":
        integrand = lambda rho: (2.0 * q_of(rho) * qp_of(rho)) ** 2 \
            * rho ** (dim - 1)
    else:
        raise ValueError(kind)
    area = 2.0 * np.pi ** (dim / 2.0) / gamma(dim / 2.0)
    core, _ = quad(integrand, 1e-6, rho_m, limit=400)
    tail, _ = quad(integrand, rho_m, np.inf, limit=200)
    return area * (core + tail)


if __name__ == "__main__":
    import mpmath

    mpmath.mp.dps = 30
    d = mpmath.mpf("0.5")
    h_val = mpmath.sqrt(1 + 2 * d) / 2 \
        + mpmath.asinh(mpmath.sqrt(2 * d)) / (2 * mpmath.sqrt(2 * d))
    print(f"H_HALF_ONE = {float(h_val)!r}")
    for dim, p in [(3, 3), (2, 3), (3, 2)]:
        print(f"Q0[{dim},{p}] = {nls_height(dim, p)!r}")
    for dim, p in [(3, 3), (2, 3), (3, 2)]:
        print(f"QMASS[{dim},{p}] = {nls_profile_integral(dim, p, 'mass')!r}")
    print(f"QGRADSQ[3,2] = {nls_profile_integral(3, 2, 'grad_sq')!r}")
    print(f"QGRADSQ[2,3] = {nls_profile_integral(2, 3, 'grad_sq')!r}")
