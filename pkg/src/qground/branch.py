"""Frequency-ladder orchestration: scheduling solves, assembling mass-curve
points, warm starts and flat-file persistence.

A sweep walks a geometric omega ladder downward.  Each new point seeds its
shooting bracket from the previous height through the NLS scaling law
mapped through the transform (exact for delta = 0, a good first guess
otherwise).  Results land in an append-only store keyed by
(N, p, delta, omega, resolution); re-running a point overwrites only if
its residuals improve.  Persistence is CSV plus JSON sidecars and is
byte-deterministic for a fixed plan.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from . import spectra, transform
from .asymptotics import MassCurvePoint, extract_lambda, ladder_derivative
from .errors import InsufficientNeighbors, InvalidParams, QGroundError
from .params import Params, classify
from .shooting import ShootingConfig, SolveReport, solve_ground_state

CSV_COLUMNS = ["omega", "M", "Mprime_fd", "Mprime_res", "T", "beta",
               "Qgrad", "E", "m_omega", "lambda"]


def _fmt(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.17g}"


@dataclass(frozen=True)
class SweepPlan:
    """A ladder of frequencies for one (N, p, delta) with run options."""

    dim: int
    p: Union[int, float, str, Fraction]
    delta: float
    omegas: tuple[float, ...]
    resolution: int = 1024
    with_spectra: bool = False
    keep_reports: bool = True
    jobs: int = 1
    tag: str = "run"

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.omegas, self.omegas[1:])):
            raise InvalidParams("the omega ladder must be strictly decreasing")
        for w in self.omegas:
            Params(self.dim, self.p, self.delta, w)  # validates

    def params_at(self, omega: float) -> Params:
        return Params(self.dim, self.p, self.delta, omega)


def geometric_ladder(start: float, stop: float, ratio: float) -> tuple[float, ...]:
    """Frequencies start, start*ratio, ... down to stop (inclusive-ish)."""
    if not (0 < ratio < 1 and 0 < stop <= start):
        raise InvalidParams("need 0 < ratio < 1 and 0 < stop <= start")
    out = []
    w = start
    while w >= stop * (1.0 - 1e-12):
        out.append(w)
        w *= ratio
    return tuple(out)


@dataclass
class PointRecord:
    key: tuple
    point: MassCurvePoint
    accepted: bool
    failure: Optional[str] = None
    report: Optional[SolveReport] = None
    spectral: Optional[spectra.SpectralReport] = None

    def residual_score(self) -> float:
        if self.report is None:
            return math.inf
        return max(self.report.pohozaev_residual, self.report.nehari_residual)


class BranchStore:
    """Append-only record of computed branch points, keyed by
    (N, p, delta, omega, resolution)."""

    def __init__(self, plan: Optional[SweepPlan] = None):
        self.plan = plan
        self._records: dict[tuple, PointRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def insert(self, record: PointRecord) -> bool:
        """Idempotent insert: an existing point is replaced only when the
        new record's identity residuals are strictly better."""
        old = self._records.get(record.key)
        if old is not None and old.residual_score() <= record.residual_score():
            return False
        self._records[record.key] = record
        return True

    def records(self) -> list[PointRecord]:
        return sorted(self._records.values(), key=lambda r: -r.point.omega)

    def points(self, accepted_only: bool = True) -> list[MassCurvePoint]:
        return [r.point for r in self.records()
                if r.accepted or not accepted_only]

    def reports(self) -> list[SolveReport]:
        return [r.report for r in self.records() if r.report is not None]

    def failures(self) -> list[tuple[tuple, str]]:
        return [(r.key, r.failure) for r in self.records() if r.failure]

    # -- persistence --------------------------------------------------------

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records():
            q = rec.point
            writer.writerow([_fmt(x) for x in (
                q.omega, q.mass, q.mprime_fd, q.mprime_res, q.dirichlet,
                q.beta, q.quasi_grad, q.energy, q.m_omega, q.lambda_omega)])
        return buf.getvalue()

    def write(self, out_dir: Union[str, Path]) -> Path:
        """Write runs/<tag>/branch.csv plus per-point JSON sidecars."""
        tag = self.plan.tag if self.plan else "run"
        root = Path(out_dir) / tag
        (root / "points").mkdir(parents=True, exist_ok=True)
        (root / "branch.csv").write_text(self.to_csv_string())
        for rec in self.records():
            name = f"{rec.point.omega:.17g}.json"
            payload = {"schema": 1, "accepted": rec.accepted,
                       "failure": rec.failure}
            if rec.report is not None:
                payload["solve"] = rec.report.to_json_dict()
            if rec.spectral is not None:
                payload["spectrum"] = rec.spectral.to_json_dict()
            (root / "points" / name).write_text(
                json.dumps(payload, indent=2) + "\n")
        return root

    @staticmethod
    def read_branch_csv(path: Union[str, Path]) -> list[MassCurvePoint]:
        def val(s: str) -> Optional[float]:
            x = float(s)
            return None if math.isnan(x) else x

        points = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                points.append(MassCurvePoint(
                    omega=float(row["omega"]), mass=val(row["M"]),
                    mprime_fd=val(row["Mprime_fd"]),
                    mprime_res=val(row["Mprime_res"]), dirichlet=float(row["T"]),
                    beta=float(row["beta"]), quasi_grad=float(row["Qgrad"]),
                    energy=float(row["E"]), m_omega=val(row["m_omega"]),
                    lambda_omega=val(row["lambda"]), regime=""))
        return points


def scaled_height_guess(prev_height: float, prev_omega: float, omega: float,
                        params: Params) -> float:
    """Warm-start height: the NLS law u(0) ~ w^{1/(p-1)} mapped through h."""
    ctx = transform.TransformContext(params.delta)
    u0 = transform.r(prev_height, ctx)
    scaled = (omega / prev_omega) ** (1.0 / (params.p - 1.0)) * u0
    return float(transform.h(scaled, ctx))


def compute_point(params: Params, resolution: int = 1024,
                  guess: Optional[float] = None,
                  with_spectra: bool = False) -> PointRecord:
    """Solve one branch point and package it as a record (never raises for
    solver failures: they are recorded instead)."""
    key = (params.dim, params.p, params.delta, params.omega, resolution)
    regime = classify(params)
    try:
        report = solve_ground_state(
            params, ShootingConfig(resolution=resolution), guess=guess)
    except QGroundError as exc:
        empty = MassCurvePoint(
            omega=params.omega, mass=None, mprime_fd=None, mprime_res=None,
            dirichlet=math.nan, beta=math.nan, quasi_grad=math.nan,
            energy=math.nan, m_omega=None, lambda_omega=None, regime=regime.tag)
        return PointRecord(key=key, point=empty, accepted=False,
                           failure=f"{type(exc).__name__}: {exc}")

    spectral = None
    mprime_res = None
    failure = None
    if params.omega > 0:
        try:
            if with_spectra:
                spectral = spectra.build_spectral_report(report)
                mprime_res = spectral.mprime.primal
            else:
                mprime_res = spectra.mprime_resolvent(
                    report.u, report.v, params).primal
        except QGroundError as exc:
            failure = f"{type(exc).__name__}: {exc}"
    lam = None
    if regime.is_critical:
        lam = extract_lambda(report.u, params)
    d = report.diagnostics
    point = MassCurvePoint(
        omega=params.omega, mass=d.mass, mprime_fd=None,
        mprime_res=mprime_res, dirichlet=d.dirichlet, beta=d.beta,
        quasi_grad=d.quasi_grad, energy=d.energy, m_omega=d.m_omega,
        lambda_omega=lam, regime=regime.tag)
    return PointRecord(key=key, point=point, accepted=bool(report.accepted()),
                       failure=failure, report=report, spectral=spectral)


def _worker(args) -> PointRecord:
    dim, p, delta, omega, resolution, guess, with_spectra = args
    return compute_point(Params(dim, p, delta, omega), resolution, guess,
                         with_spectra)


def run_sweep(plan: SweepPlan) -> BranchStore:
    """Walk the ladder, warm-starting each solve from its predecessor.

    With jobs > 1 the first point anchors the scaling-law guesses and the
    remaining points run in a process pool; results merge in ladder order
    so the output is identical to a serial run.
    """
    store = BranchStore(plan)
    if not plan.omegas:
        return store
    if plan.jobs > 1:
        anchor = compute_point(plan.params_at(plan.omegas[0]),
                               plan.resolution, None, plan.with_spectra)
        store.insert(_strip(anchor, plan))
        a0 = anchor.report.shooting_height if anchor.report else None
        tasks = []
        for w in plan.omegas[1:]:
            guess = None
            if a0 is not None:
                guess = scaled_height_guess(a0, plan.omegas[0], w,
                                            plan.params_at(w))
            tasks.append((plan.dim, plan.p, plan.delta, w, plan.resolution,
                          guess, plan.with_spectra))
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            for rec in pool.map(_worker, tasks):
                store.insert(_strip(rec, plan))
    else:
        guess = None
        prev = None
        for w in plan.omegas:
            params = plan.params_at(w)
            if prev is not None and prev.report is not None:
                guess = scaled_height_guess(
                    prev.report.shooting_height, prev.point.omega, w, params)
            rec = compute_point(params, plan.resolution, guess,
                                plan.with_spectra)
            store.insert(_strip(rec, plan))
            prev = rec
    _fill_mprime_fd(store)
    return store


def _strip(rec: PointRecord, plan: SweepPlan) -> PointRecord:
    if not plan.keep_reports:
        rec.report = None
    return rec


def _fill_mprime_fd(store: BranchStore) -> None:
    recs = [r for r in store.records() if r.accepted and r.point.mass is not None]
    if len(recs) < 3:
        return
    recs = sorted(recs, key=lambda r: r.point.omega)
    omegas = [r.point.omega for r in recs]
    masses = [r.point.mass for r in recs]
    for i, rec in enumerate(recs):
        try:
            fd = ladder_derivative(omegas, masses, i)
        except InsufficientNeighbors:
            continue
        q = rec.point
        rec.point = MassCurvePoint(
            omega=q.omega, mass=q.mass, mprime_fd=fd,
            mprime_res=q.mprime_res, dirichlet=q.dirichlet, beta=q.beta,
            quasi_grad=q.quasi_grad, energy=q.energy, m_omega=q.m_omega,
            lambda_omega=q.lambda_omega, regime=q.regime)


def mprime_fd(store: BranchStore, omega: float) -> float:
    """Centered finite-difference M'(omega) at a ladder point."""
    recs = sorted((r for r in store.records()
                   if r.accepted and r.point.mass is not None),
                  key=lambda r: r.point.omega)
    omegas = [r.point.omega for r in recs]
    masses = [r.point.mass for r in recs]
    for i, w in enumerate(omegas):
        if math.isclose(w, omega, rel_tol=1e-12):
            return ladder_derivative(omegas, masses, i)
    raise InsufficientNeighbors(f"omega = {omega} is not an interior ladder point")


def energy_identity_check(params: Params, resolution: int = 1024,
                          ratio: float = 0.95, width: int = 5) -> float:
    """Relative residual of E'(omega) = -(omega/2) M'(omega) at one point.

    Both sides are centered finite differences on a dedicated local ladder
    of `width` points at the given spacing ratio (warm-started, so cheap).
    The production branches use ratio 1/2, too coarse for differencing the
    energy (E ~ omega^{3/2} in the subcritical regime makes the stencil
    bias a few percent there); at ratio 0.95 the bias is ~1e-6.
    """
    half = width // 2
    omegas = [params.omega * ratio ** k for k in range(-half, half + 1)]
    omegas.sort(reverse=True)
    energies, masses, ladder = [], [], []
    guess = None
    for w in omegas:
        pw = params.with_omega(w)
        report = solve_ground_state(
            pw, ShootingConfig(resolution=resolution), guess=guess)
        guess = scaled_height_guess(report.shooting_height, w, w * ratio, pw)
        d = report.diagnostics
        ladder.append(w)
        energies.append(d.energy)
        masses.append(d.mass)
    ladder = ladder[::-1]
    energies = energies[::-1]
    masses = masses[::-1]
    mid = half
    e_prime = ladder_derivative(ladder, energies, mid)
    m_prime = ladder_derivative(ladder, masses, mid)
    rhs = -0.5 * ladder[mid] * m_prime
    return abs(e_prime - rhs) / max(abs(rhs), 1e-300)


def default_out_dir() -> Path:
    return Path(os.environ.get("QG_OUT_DIR", "runs"))
