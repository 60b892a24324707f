"""Solution operators of the two sub-problems.

``phi_A`` solves u_t = A(u) exactly in Fourier space.  ``phi_B`` integrates
u_t = -div(u v(u)) with classical RK4 on equal substeps sized by a CFL-like
bound, watching an H^s norm for approach to blow-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import GridSpec, SpectralField, derivative_symbol, sobolev_norm
from .operators import DIFFUSIVE, REJECTED, ASpec, VSpec

__all__ = [
    "BFlowControl",
    "BlowUpError",
    "SubstepLimitError",
    "phi_A",
    "b_rhs",
    "phi_B",
    "substep_count",
]


class BlowUpError(RuntimeError):
    """The H^s guard tripped: the B-flow is approaching its maximal existence time."""

    def __init__(self, message, time=None, norm=None, threshold=None):
        super().__init__(message)
        self.time = time
        self.norm = norm
        self.threshold = threshold


class SubstepLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class BFlowControl:
    """Controls for the B-flow integrator.

    ``blowup_threshold=None`` means 100 x the H^{guard_index} norm of the data
    the guard is first armed with.
    """

    substep_cap: float = 0.5
    max_substeps: int = 200_000
    blowup_threshold: Optional[float] = None
    guard_index: float = 4.0
    blowup_factor: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.substep_cap <= 1.0:
            raise ValueError("substep_cap must lie in (0, 1]")
        if self.max_substeps < 1:
            raise ValueError("max_substeps must be >= 1")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if not self.blowup_factor > 0:
            raise ValueError("blowup_factor must be positive")

    def armed(self, u0: SpectralField) -> "BFlowControl":
        """Copy with a concrete threshold derived from ``u0`` if none is set."""
        if self.blowup_threshold is not None:
            return self
        level = self.blowup_factor * sobolev_norm(u0, self.guard_index)
        if level == 0.0:
            level = math.inf
        return BFlowControl(
            self.substep_cap, self.max_substeps, level, self.guard_index, self.blowup_factor
        )


def phi_A(t: float, u0: SpectralField, a: ASpec) -> SpectralField:
    """exp(t A) u0, computed mode by mode."""
    grid = u0.grid
    cls = a.classify(grid)
    if cls == REJECTED:
        raise ValueError(f"A-flow undefined for non-admissible operator {a!r}")
    if t < 0 and cls == DIFFUSIVE:
        raise ValueError("negative time is only allowed for dispersive operators")
    if t == 0:
        return SpectralField(grid, u0.coeffs.copy())
    return SpectralField(grid, np.exp(t * a.symbol(grid)) * u0.coeffs)


class _BOperator:
    """Precomputed symbols for B(u) = -div(u v(u)) on one grid."""

    def __init__(self, grid: GridSpec, v: VSpec):
        self.grid = grid
        self.m = v.multipliers(grid)
        self.d = np.stack(
            [derivative_symbol(grid, tuple(int(i == j) for i in range(grid.dims)))
             for j in range(grid.dims)]
        )
        self.mask = grid.dealias_mask

    def __call__(self, uc: np.ndarray) -> np.ndarray:
        n = self.grid.size
        uc = np.where(self.mask, uc, 0.0)
        ux = np.fft.ifftn(uc * n).real
        out = np.zeros_like(uc)
        for mj, dj in zip(self.m, self.d):
            vx = np.fft.ifftn(mj * uc * n).real
            flux = np.where(self.mask, np.fft.fftn(ux * vx) / n, 0.0)
            out = out - dj * flux
        out.flat[0] = 0.0
        return out

    def max_speed(self, uc: np.ndarray) -> float:
        n = self.grid.size
        uc = np.where(self.mask, uc, 0.0)
        return max(float(np.max(np.abs(np.fft.ifftn(mj * uc * n).real))) for mj in self.m)


def b_rhs(u: SpectralField, v: VSpec) -> SpectralField:
    """-div(u v(u)) with dealiased pseudo-spectral products; zero mean mode."""
    return SpectralField(u.grid, _BOperator(u.grid, v)(u.coeffs))


def substep_count(t: float, u0: SpectralField, v: VSpec, ctrl: BFlowControl) -> int:
    op = _BOperator(u0.grid, v)
    return _substeps(t, op, u0.coeffs, ctrl)


def _substeps(t, op, uc, ctrl):
    if t == 0:
        return 0
    # largest wavenumber on the grid, not the dealiasing cutoff
    kmax = op.grid.n // 2
    tau_max = ctrl.substep_cap / (op.max_speed(uc) * kmax + 1e-300)
    return max(1, math.ceil(abs(t) / tau_max))


def phi_B(
    t: float,
    u0: SpectralField,
    v: VSpec,
    ctrl: BFlowControl = BFlowControl(),
    n_substeps: Optional[int] = None,
) -> SpectralField:
    """RK4 approximation of the B-flow at time ``t``.

    The substep count is fixed up front from the velocity of ``u0``;
    ``n_substeps`` overrides it (used for self-convergence checks).
    """
    if t < 0:
        raise ValueError("B-flow time must be non-negative")
    grid = u0.grid
    if t == 0 or getattr(v, "is_zero", False):
        return SpectralField(grid, u0.coeffs.copy())
    op = _BOperator(grid, v)
    ctrl = ctrl.armed(u0)
    n_sub = n_substeps if n_substeps is not None else _substeps(t, op, u0.coeffs, ctrl)
    if n_sub > ctrl.max_substeps:
        raise SubstepLimitError(
            f"B-flow needs {n_sub} substeps for t={t:g}, limit is {ctrl.max_substeps}"
        )
    tau = t / n_sub
    uc = u0.coeffs.copy()
    mean = uc.flat[0]
    weight = (1.0 + grid.ksq) ** ctrl.guard_index
    for i in range(n_sub):
        k1 = op(uc)
        k2 = op(uc + 0.5 * tau * k1)
        k3 = op(uc + 0.5 * tau * k2)
        k4 = op(uc + tau * k3)
        uc = uc + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        uc.flat[0] = mean
        norm = math.sqrt(grid.volume * float(np.sum(weight * np.abs(uc) ** 2)))
        if not norm <= ctrl.blowup_threshold:
            raise BlowUpError(
                f"H^{ctrl.guard_index:g} norm {norm:.3e} exceeded guard "
                f"{ctrl.blowup_threshold:.3e} at B-flow time {(i + 1) * tau:.6g}: "
                "solution is approaching its maximal time of existence",
                time=(i + 1) * tau,
                norm=norm,
                threshold=ctrl.blowup_threshold,
            )
    return SpectralField(grid, uc)
