"""Error measurement, log-log rate fits and conservation monitoring."""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import SpectralField, l2_norm, sobolev_norm
from .operators import DIFFUSIVE, DISPERSIVE, ASpec, VSpec
from .splitting import (
    EvolutionAborted,
    ReferenceSolution,
    SplitConfig,
    Trajectory,
    evolve,
    reference_solution,
)
from .subflows import BFlowControl, phi_A

__all__ = [
    "EXACT_TOL",
    "fit_rate",
    "StudyRow",
    "ConvergenceReport",
    "StudyRun",
    "run_study",
    "convergence_study",
    "ConservationReport",
    "conservation_report",
]

#: errors at or below this level count as the exact regime (no rate is fitted)
EXACT_TOL = 1e-12


def fit_rate(rows: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(dt).

    Returns ``(rate, residual)`` where residual is the largest absolute
    deviation from the fitted line in log space.  Rows with non-positive or
    non-finite errors are dropped with a warning.
    """
    usable = [(dt, e) for dt, e in rows if e > 0 and math.isfinite(e)]
    if len(usable) < len(rows):
        warnings.warn(f"fit_rate: excluded {len(rows) - len(usable)} row(s) with zero or invalid error")
    if len(usable) < 3:
        raise ValueError(f"need at least 3 usable rows to fit a rate, got {len(usable)}")
    x = np.log([dt for dt, _ in usable])
    y = np.log([e for _, e in usable])
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return float(slope), residual


@dataclass
class StudyRow:
    dt: float
    final: Optional[SpectralField]
    wall_time: float
    valid: bool = True
    message: str = ""


@dataclass
class ConvergenceReport:
    preset: str
    method: str
    norm: float
    dts: list[float]
    errors: list[float]
    fitted_rate: float
    fit_residual: float
    ref_certificate: float
    wall_times: list[float] = field(default_factory=list)
    valid: list[bool] = field(default_factory=list)
    l2_deviation: list[float] = field(default_factory=list)
    exact: bool = False

    @property
    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.dts, self.errors))

    def summary(self) -> str:
        if self.exact:
            return f"{self.preset}/{self.method} H^{self.norm:g}: exact regime (all errors <= {EXACT_TOL:g})"
        return (
            f"{self.preset}/{self.method} H^{self.norm:g}: rate {self.fitted_rate:.4f} "
            f"(residual {self.fit_residual:.3g}, certificate {self.ref_certificate:.3g})"
        )


@dataclass
class StudyRun:
    """Final states of one study against its reference; norms are taken lazily."""

    preset: str
    method: str
    u0: SpectralField
    reference: ReferenceSolution
    rows: list[StudyRow]

    def report(self, norm: float = 0.0, certify: bool = True) -> ConvergenceReport:
        errors = []
        for r in self.rows:
            errors.append(sobolev_norm(r.final - self.reference.field, norm) if r.valid else math.nan)
        dts = [r.dt for r in self.rows]
        valid_errs = [e for e, r in zip(errors, self.rows) if r.valid]
        exact = bool(valid_errs) and max(valid_errs) <= EXACT_TOL
        rate = resid = math.nan
        if not exact:
            if certify:
                self.reference.certify(min(_l2_errors(self)))
            good = [(dt, e) for dt, e, r in zip(dts, errors, self.rows) if r.valid]
            if len(good) >= 3:
                rate, resid = fit_rate(good)
        n0 = l2_norm(self.u0)
        return ConvergenceReport(
            preset=self.preset,
            method=self.method,
            norm=norm,
            dts=dts,
            errors=errors,
            fitted_rate=rate,
            fit_residual=resid,
            ref_certificate=self.reference.certificate,
            wall_times=[r.wall_time for r in self.rows],
            valid=[r.valid for r in self.rows],
            l2_deviation=[abs(l2_norm(r.final) - n0) if r.valid else math.nan for r in self.rows],
            exact=exact,
        )


def _l2_errors(run: StudyRun) -> list[float]:
    return [l2_norm(r.final - run.reference.field) for r in run.rows if r.valid]


def _check_dt_list(dt_list: Sequence[float], T: float) -> list[float]:
    dts = [float(d) for d in dt_list]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dt_list must be strictly decreasing")
    for d in dts:
        q = T / d
        if abs(q - round(q)) > 1e-9 * q:
            raise ValueError(f"dt={d} does not divide T={T}: runs would not share the final time")
    return dts


def run_study(
    u0: SpectralField,
    a: ASpec,
    v: VSpec,
    method: str,
    dt_list: Sequence[float],
    T: float,
    refinement: int = 6,
    bflow: BFlowControl = BFlowControl(),
    preset: str = "custom",
    threads: int = 1,
    reference: Optional[ReferenceSolution] = None,
) -> StudyRun:
    """Evolve once per dt and once (pair) for the reference.

    Guard trips mark the row invalid and are skipped by the fit.
    """
    dts = _check_dt_list(dt_list, T)
    bflow = bflow.armed(u0)
    if reference is None:
        ref_cfg = SplitConfig(method, dts[-1], T, a, v, bflow)
        reference = reference_solution(u0, ref_cfg, refinement)

    def one(dt):
        t0 = time.perf_counter()
        cfg = SplitConfig(method, dt, T, a, v, bflow, record_every=10**9)
        try:
            final = evolve(u0, cfg).final
        except EvolutionAborted as exc:
            warnings.warn(f"row dt={dt:g} excluded: {exc}")
            return StudyRow(dt, None, time.perf_counter() - t0, False, str(exc))
        return StudyRow(dt, final, time.perf_counter() - t0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, dts))
    else:
        rows = [one(dt) for dt in dts]
    return StudyRun(preset, method, u0, reference, rows)


def convergence_study(
    preset,
    method: str,
    dt_list: Sequence[float],
    u0: SpectralField,
    T: float,
    norm: float = 0.0,
    refinement: int = 6,
    bflow: BFlowControl = BFlowControl(),
    threads: int = 1,
) -> ConvergenceReport:
    """Measure the splitting error at the shared final time for each dt.

    ``preset`` is anything with ``id``, ``a`` and ``v`` attributes (see
    :mod:`activesplit.presets`).  Raises
    :class:`~activesplit.splitting.ReferenceNotConverged` when the reference
    is not at least 100x more accurate than the finest row.
    """
    run = run_study(
        u0, preset.a, preset.v, method, dt_list, T, refinement, bflow, preset.id, threads
    )
    return run.report(norm)


@dataclass
class ConservationReport:
    times: list[float]
    mass: list[float]
    l2: list[float]
    h4: list[float]
    mass_drift: float
    l2_changes: list[float]
    monotonicity_violations: list[int]
    isometry_violation: float
    classification: str
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.mass_drift <= 1e-12
            and not self.monotonicity_violations
            and self.isometry_violation <= self.tol
        )


def conservation_report(traj: Trajectory, a: ASpec, tol: float = 1e-10) -> ConservationReport:
    """Mass, L2 and H4 per snapshot with conservation/dissipation flags.

    Mass drift is relative to max(|mass_0|, |u_0|_2 sqrt(volume)), which bounds
    |mass| by Cauchy-Schwarz and stays meaningful for zero-mean data.  For
    diffusive A, any L2 increase beyond ``tol`` (relative, per snapshot) is
    flagged.  For dispersive A, the A-flow over each snapshot interval is
    applied to the snapshot and its L2 change is the isometry check; the
    change of the full splitting trajectory is only reported.
    """
    if len(traj.times) < 2:
        raise ValueError("trajectory needs at least two snapshots")
    grid = traj.fields[0].grid
    cls = a.classify(grid)
    m0 = traj.mass[0]
    scale = max(abs(m0), traj.l2[0] * math.sqrt(grid.volume))
    drift = max(abs(m - m0) for m in traj.mass) / scale if scale > 0 else 0.0
    changes = [b - a_ for a_, b in zip(traj.l2, traj.l2[1:])]
    violations: list[int] = []
    if cls == DIFFUSIVE:
        violations = [i + 1 for i, (p, q) in enumerate(zip(traj.l2, traj.l2[1:])) if q > p * (1 + tol)]
    iso = 0.0
    if cls == DISPERSIVE:
        for t0, t1, u in zip(traj.times, traj.times[1:], traj.fields):
            n = l2_norm(u)
            if n > 0:
                iso = max(iso, abs(l2_norm(phi_A(t1 - t0, u, a)) - n) / n)
    return ConservationReport(
        times=list(traj.times),
        mass=list(traj.mass),
        l2=list(traj.l2),
        h4=list(traj.h4),
        mass_drift=drift,
        l2_changes=changes,
        monotonicity_violations=violations,
        isometry_violation=iso,
        classification=cls,
        tol=tol,
    )
