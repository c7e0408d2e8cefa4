"""Model parameters, regime classification, radial grids and sampled profiles.

The stationary equation lives on R^N with an exponent p, a quasilinear
coupling delta and a frequency omega.  Everything downstream (solver,
quadrature, spectra, asymptotics) shares the types defined here.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import InvalidParams

# Sobolev regime tags
SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
# Mass regime tags (thresholds 1 + 4/N and 3 + 4/N)
MASS_SUBCRITICAL = "mass-subcritical"
MASS_CRITICAL_PLUS = "mass-critical-plus"

#: decimal inputs within this window of the critical exponent are
#: classified critical; exact rationals are compared exactly.
CRITICAL_WINDOW = 1e-12

ExponentLike = Union[int, float, str, Fraction]


def _parse_exponent(p: ExponentLike) -> tuple[float, Optional[Fraction]]:
    """Return (float value, exact Fraction or None) for an exponent input.

    Ints, Fractions and strings like "7/3" are kept exact so the critical
    regime can be detected by rational comparison.  Bare floats are not
    promoted: they classify through the CRITICAL_WINDOW tolerance instead.
    """
    if isinstance(p, Fraction):
        return float(p), p
    if isinstance(p, int):
        return float(p), Fraction(p)
    if isinstance(p, str):
        frac = Fraction(p)
        return float(frac), frac
    return float(p), None


@dataclass(frozen=True)
class Params:
    """Parameters (N, p, delta, omega) of the stationary problem.

    delta = 0 selects the plain NLS oracle; omega = 0 selects the zero-mass
    problem.  Construction validates the existence condition
    p < (3N+2)/(N-2) for N >= 3.
    """

    dim: int
    p: float
    delta: float
    omega: float
    p_exact: Optional[Fraction] = field(default=None, compare=False)

    def __init__(self, dim: int, p: ExponentLike, delta: float, omega: float):
        p_val, p_frac = _parse_exponent(p)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "p", p_val)
        object.__setattr__(self, "p_exact", p_frac)
        object.__setattr__(self, "delta", float(delta))
        object.__setattr__(self, "omega", float(omega))
        self._validate()

    def _validate(self) -> None:
        if self.dim < 2:
            raise InvalidParams(f"dim must be >= 2, got {self.dim}")
        if not self.p > 1:
            raise InvalidParams(f"exponent p must be > 1, got {self.p}")
        if self.delta < 0:
            raise InvalidParams(f"coupling delta must be >= 0, got {self.delta}")
        if self.omega < 0:
            raise InvalidParams(f"frequency omega must be >= 0, got {self.omega}")
        if self.dim >= 3:
            bound = self.p_existence_max()
            exceeded = (self.p_exact >= bound) if self.p_exact is not None else (
                self.p >= float(bound) - CRITICAL_WINDOW
            )
            if exceeded:
                raise InvalidParams(
                    f"p = {self.p} violates the existence bound p < (3N+2)/(N-2)"
                    f" = {bound} for N = {self.dim}"
                )

    # -- exponent thresholds ------------------------------------------------

    def p_critical(self) -> Optional[Fraction]:
        """Sobolev-critical exponent (N+2)/(N-2); None in dimension 2."""
        if self.dim == 2:
            return None
        return Fraction(self.dim + 2, self.dim - 2)

    def p_mass_critical(self) -> Fraction:
        return 1 + Fraction(4, self.dim)

    def p_blowup(self) -> Fraction:
        return 3 + Fraction(4, self.dim)

    def p_existence_max(self) -> Fraction:
        return Fraction(3 * self.dim + 2, self.dim - 2)

    def two_star(self) -> Optional[float]:
        """Critical Sobolev exponent 2N/(N-2); None in dimension 2."""
        if self.dim == 2:
            return None
        return 2.0 * self.dim / (self.dim - 2)

    def with_omega(self, omega: float) -> "Params":
        return Params(self.dim, self.p_exact if self.p_exact is not None else self.p,
                      self.delta, omega)


@dataclass(frozen=True)
class Regime:
    """Sobolev regime tag plus the governing exponent thresholds.

    The mass tag records the position of p relative to 1 + 4/N (below or
    equal: the mass curve increases near omega = 0) and 3 + 4/N (at or
    above: unconditionally decreasing); in between it is None.
    """

    tag: str
    mass_tag: Optional[str]
    sobolev_threshold: Optional[Fraction]
    mass_threshold: Fraction
    blowup_threshold: Fraction

    @property
    def is_critical(self) -> bool:
        return self.tag == CRITICAL

    @property
    def is_subcritical(self) -> bool:
        return self.tag == SUBCRITICAL

    @property
    def is_supercritical(self) -> bool:
        return self.tag == SUPERCRITICAL


def _compare_to_threshold(params: Params, threshold: Fraction) -> int:
    """-1, 0, +1 for p below / at / above the threshold."""
    if params.p_exact is not None:
        d = params.p_exact - threshold
        return (d > 0) - (d < 0)
    d = params.p - float(threshold)
    if abs(d) < CRITICAL_WINDOW:
        return 0
    return 1 if d > 0 else -1


def classify(params: Params) -> Regime:
    """Classify (N, p) into the subcritical / critical / supercritical regime.

    Dimension 2 is always subcritical.  Criticality requires exact rational
    equality p = (N+2)/(N-2) (decimal inputs use a 1e-12 window).
    """
    p_crit = params.p_critical()
    if params.dim == 2:
        tag = SUBCRITICAL
    else:
        cmp = _compare_to_threshold(params, p_crit)
        tag = (SUBCRITICAL, CRITICAL, SUPERCRITICAL)[cmp + 1]
    mass_cmp = _compare_to_threshold(params, params.p_mass_critical())
    blowup_cmp = _compare_to_threshold(params, params.p_blowup())
    if mass_cmp <= 0:
        mass_tag: Optional[str] = MASS_SUBCRITICAL
    elif blowup_cmp >= 0:
        mass_tag = MASS_CRITICAL_PLUS
    else:
        mass_tag = None
    return Regime(
        tag=tag,
        mass_tag=mass_tag,
        sobolev_threshold=p_crit,
        mass_threshold=params.p_mass_critical(),
        blowup_threshold=params.p_blowup(),
    )


# ---------------------------------------------------------------------------
# radial grids
# ---------------------------------------------------------------------------

#: outer radius rules: exponential tails need 15 decay lengths, power tails
#: need plain range.
R_CORE = 20.0
ZERO_MASS_R_MAX = 1000.0
MIN_RESOLUTION = 64
CORE_NODE_FRACTION = 0.6


def r_max_for(omega: float) -> float:
    if omega > 0:
        return max(50.0, 15.0 / np.sqrt(omega))
    return ZERO_MASS_R_MAX


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radial nodes r_0 = 0 < ... < r_M = R_max.

    Nodes come from the smooth stretching map
        rho(xi) = R_max * sinh(alpha * xi) / sinh(alpha),  xi in [0, 1]
    sampled at uniform xi.  The map keeps the node density high near the
    origin and sparse in the tail without any spacing seam, so second-order
    stencils and Simpson weights keep their formal order across the whole
    domain.  `jacobian` holds d rho / d xi at the nodes.
    """

    nodes: np.ndarray
    jacobian: np.ndarray
    xi: np.ndarray
    alpha: float
    r_max: float
    spacing: str = "sinh"

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.jacobian.setflags(write=False)
        self.xi.setflags(write=False)

    @property
    def resolution(self) -> int:
        return len(self.nodes) - 1

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0])

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])


def make_grid(params_or_omega, resolution: int = 1024,
              r_max: Optional[float] = None) -> RadialGrid:
    """Build the radial grid for a given frequency.

    R_max = max(50, 15/sqrt(omega)) for omega > 0 and 1000 for omega = 0;
    about 60% of the nodes land inside the core [0, min(R_max, 20)].
    In the critical regime the solution spreads over the blow-up length
    ~ omega^{-1/N}, so the core widens with it: a fixed 20-unit core would
    leave the bubble under-resolved at very small frequencies.
    """
    omega = params_or_omega.omega if isinstance(params_or_omega, Params) \
        else float(params_or_omega)
    if resolution < MIN_RESOLUTION:
        raise InvalidParams(f"resolution must be >= {MIN_RESOLUTION}")
    resolution = int(resolution) + (int(resolution) % 2)  # Simpson wants even
    if r_max is None:
        r_max = r_max_for(omega)
    r_core = R_CORE
    if isinstance(params_or_omega, Params) and omega > 0:
        p = params_or_omega
        if p.dim >= 3 and classify(p).is_critical:
            r_core = max(R_CORE, 5.0 * omega ** (-1.0 / p.dim))
    r_core = min(r_max, r_core)
    target = r_core / r_max
    if target >= CORE_NODE_FRACTION:          # nearly uniform domain
        alpha = 1e-8
    else:
        alpha = brentq(
            lambda a: np.sinh(CORE_NODE_FRACTION * a) / np.sinh(a) - target,
            1e-8, 80.0)
    xi = np.linspace(0.0, 1.0, resolution + 1)
    nodes = r_max * np.sinh(alpha * xi) / np.sinh(alpha)
    nodes[0] = 0.0
    nodes[-1] = r_max
    jac = r_max * alpha * np.cosh(alpha * xi) / np.sinh(alpha)
    return RadialGrid(nodes=nodes, jacobian=jac, xi=xi, alpha=alpha, r_max=r_max)


# ---------------------------------------------------------------------------
# decay metadata and profiles
# ---------------------------------------------------------------------------

DECAY_EXPONENTIAL = "exponential"
DECAY_POWER = "power"
DECAY_NONE = "none"


@dataclass(frozen=True)
class Decay:
    """Analytic tail attached to a profile beyond `match_radius`.

    exponential: u(rho) = amplitude * rho^(-(N-1)/2) * exp(-rate*rho)
    power:       u(rho) = amplitude * rho^(-exponent)
    """

    kind: str
    rate: float = 0.0          # kappa = sqrt(omega) for exponential tails
    exponent: float = 0.0      # N-2 for zero-mass tails
    amplitude: float = 0.0
    match_radius: float = np.inf
    dim: int = 3

    def value(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.kind == DECAY_EXPONENTIAL:
            return self.amplitude * rho ** (-(self.dim - 1) / 2.0) \
                * np.exp(-self.rate * rho)
        if self.kind == DECAY_POWER:
            return self.amplitude * rho ** (-self.exponent)
        raise ValueError("tail has no analytic form")

    def derivative(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.kind == DECAY_EXPONENTIAL:
            return -(self.rate + (self.dim - 1) / (2.0 * rho)) * self.value(rho)
        if self.kind == DECAY_POWER:
            return -self.exponent * self.value(rho) / rho
        raise ValueError("tail has no analytic form")


@dataclass
class RadialProfile:
    """A radial function sampled on a grid, with decay metadata.

    Ground-state profiles are strictly positive and nonincreasing; the
    derivative at rho = 0 vanishes.  Values beyond decay.match_radius come
    from the analytic tail, never from raw integration.
    """

    grid: RadialGrid
    values: np.ndarray
    derivative_values: np.ndarray
    decay: Optional[Decay] = None
    _interp: Optional[CubicHermiteSpline] = field(default=None, repr=False)

    def __call__(self, rho):
        """Evaluate by cubic Hermite interpolation (analytic tail beyond R_max)."""
        if self._interp is None:
            self._interp = CubicHermiteSpline(
                self.grid.nodes, self.values, self.derivative_values)
        rho = np.asarray(rho, dtype=float)
        out = self._interp(np.clip(rho, 0.0, self.grid.r_max))
        if self.decay is not None and self.decay.kind != DECAY_NONE:
            far = rho > self.grid.r_max
            if np.any(far):
                out = np.where(far, self.decay.value(np.maximum(rho, 1e-300)), out)
        return out if out.ndim else float(out)

    def is_positive_decreasing(self, tol: float = 1e-10) -> bool:
        """Positivity and monotone nonincrease up to `tol` * height.

        The default sits just above the integrator's 1e-11 relative
        tolerance: profiles with very flat cores decrease by less than the
        integration noise between neighboring nodes.
        """
        scale = abs(self.values[0]) if self.values.size else 1.0
        positive = np.all(self.values > -tol * scale)
        monotone = np.all(np.diff(self.values) <= tol * scale)
        return bool(positive and monotone)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write `r,value,dvalue` rows at 17 significant digits."""
        with open(path, "w", newline="") as fh:
            self._write_csv(fh)

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self._write_csv(buf)
        return buf.getvalue()

    def _write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "value", "dvalue"])
        for r, v, dv in zip(self.grid.nodes, self.values, self.derivative_values):
            writer.writerow([f"{r:.17g}", f"{v:.17g}", f"{dv:.17g}"])
