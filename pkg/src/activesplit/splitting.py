"""Godunov and Strang splitting, full-horizon evolution and fine references."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .grid import SpectralField, l2_norm, sobolev_norm
from .operators import ASpec, VSpec
from .subflows import BFlowControl, BlowUpError, phi_A, phi_B

__all__ = [
    "GODUNOV",
    "STRANG",
    "SplitConfig",
    "Trajectory",
    "EvolutionAborted",
    "ReferenceNotConverged",
    "ReferenceSolution",
    "godunov_step",
    "strang_step",
    "evolve",
    "reference_solution",
]

GODUNOV = "godunov"
STRANG = "strang"


@dataclass(frozen=True)
class SplitConfig:
    method: str
    dt: float
    T: float
    a: ASpec
    v: VSpec
    bflow: BFlowControl = BFlowControl()
    record_every: int = 1

    def __post_init__(self):
        if self.method not in (GODUNOV, STRANG):
            raise ValueError(f"method must be 'godunov' or 'strang', got {self.method!r}")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds horizon T={self.T}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        # tolerate T/dt landing a hair below an integer
        return int(math.floor(self.T / self.dt * (1 + 1e-12)))


def godunov_step(u: SpectralField, dt: float, cfg: SplitConfig) -> SpectralField:
    """phi_A(dt) o phi_B(dt)."""
    return phi_A(dt, phi_B(dt, u, cfg.v, cfg.bflow), cfg.a)


def strang_step(u: SpectralField, dt: float, cfg: SplitConfig) -> SpectralField:
    """phi_B(dt/2) o phi_A(dt) o phi_B(dt/2)."""
    half = 0.5 * dt
    w = phi_B(half, u, cfg.v, cfg.bflow)
    w = phi_A(dt, w, cfg.a)
    return phi_B(half, w, cfg.v, cfg.bflow)


_STEPPERS = {GODUNOV: godunov_step, STRANG: strang_step}


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    fields: list[SpectralField] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    h4: list[float] = field(default_factory=list)

    def record(self, t: float, u: SpectralField) -> None:
        self.times.append(t)
        self.fields.append(u)
        self.mass.append(u.mean_mode.real * u.grid.volume)
        self.l2.append(l2_norm(u))
        self.h4.append(sobolev_norm(u, 4.0))

    @property
    def final(self) -> SpectralField:
        return self.fields[-1]


class EvolutionAborted(RuntimeError):
    """Guard trip during :func:`evolve`; ``trajectory`` holds the states reached."""

    def __init__(self, message, trajectory: Trajectory, cause: BaseException):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause


def evolve(u0: SpectralField, cfg: SplitConfig) -> Trajectory:
    """Apply floor(T/dt) steps; snapshots every ``record_every`` steps and at the end."""
    step = _STEPPERS[cfg.method]
    cfg = replace(cfg, bflow=cfg.bflow.armed(u0))
    traj = Trajectory()
    traj.record(0.0, u0)
    u = u0
    n = cfg.n_steps
    for i in range(1, n + 1):
        try:
            u = step(u, cfg.dt, cfg)
        except BlowUpError as exc:
            raise EvolutionAborted(
                f"{cfg.method} step {i} of {n} aborted: {exc}", traj, exc
            ) from exc
        if i % cfg.record_every == 0 or i == n:
            traj.record(i * cfg.dt, u)
    return traj


class ReferenceNotConverged(RuntimeError):
    pass


@dataclass
class ReferenceSolution:
    field: SpectralField
    dt_ref: float
    certificate: float
    refinement: int

    def certify(self, smallest_error: float, factor: float = 0.01) -> None:
        """Raise unless the reference's self-difference is far below ``smallest_error``."""
        if not self.certificate <= factor * smallest_error:
            raise ReferenceNotConverged(
                f"reference not converged: self-difference {self.certificate:.3e} exceeds "
                f"{factor:g} x smallest measured error {smallest_error:.3e} "
                f"(refinement {self.refinement}, dt_ref {self.dt_ref:.3e})"
            )


def reference_solution(
    u0: SpectralField,
    cfg: SplitConfig,
    refinement: int,
    dt_min: Optional[float] = None,
) -> ReferenceSolution:
    """Fine Strang solution at the horizon of ``cfg``.

    ``dt_ref = dt_min / 2**refinement`` (``dt_min`` defaults to ``cfg.dt``) and
    the B-flow substep cap is tightened by the same factor.  The certificate is
    the L2 distance to the run with ``2 * dt_ref``.
    """
    if refinement < 4:
        raise ValueError("refinement must be >= 4")
    dt_min = cfg.dt if dt_min is None else dt_min
    dt_ref = dt_min / 2**refinement
    T = math.floor(cfg.T / dt_min * (1 + 1e-12)) * dt_min
    bflow = replace(cfg.bflow.armed(u0), substep_cap=cfg.bflow.substep_cap / 2**refinement)
    fine = replace(cfg, method=STRANG, dt=dt_ref, T=T, bflow=bflow, record_every=10**9)
    coarse = replace(fine, dt=2 * dt_ref)
    u_fine = evolve(u0, fine).final
    u_coarse = evolve(u0, coarse).final
    return ReferenceSolution(u_fine, dt_ref, l2_norm(u_fine - u_coarse), refinement)
