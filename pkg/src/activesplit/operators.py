"""Fourier-multiplier operators: the linear part A and the velocity map v.

Both operators act diagonally on Fourier coefficients, so they commute with
each other exactly; the audit in :func:`check_admissibility` measures how well
that and the remaining structural conditions hold in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import (
    GridSpec,
    SpectralField,
    derivative_symbol,
    l2_norm,
    random_band_limited_field,
    sobolev_norm,
    to_spectral,
)

__all__ = [
    "DerivativeTerm",
    "FractionalLaplacian",
    "MixedTerm",
    "ASpec",
    "Burgers",
    "SQG",
    "ConvolutionKernel",
    "CustomMultiplier",
    "apply_A",
    "velocity",
    "divergence",
    "product",
    "commutator_AB",
    "leibniz_defect",
    "AdmissibilityReport",
    "check_admissibility",
]

DISPERSIVE = "dispersive"
DIFFUSIVE = "diffusive"
REJECTED = "rejected"


# --------------------------------------------------------------------------
# linear operator A
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeTerm:
    """D^l with multi-index ``l``."""

    l: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(int(x) for x in self.l))
        if any(x < 0 for x in self.l):
            raise ValueError("multi-index entries must be non-negative")

    @property
    def order(self) -> float:
        return float(sum(self.l))

    def symbol(self, grid: GridSpec) -> np.ndarray:
        return derivative_symbol(grid, self.l)


@dataclass(frozen=True)
class FractionalLaplacian:
    """-(-Delta)^{alpha/2}, i.e. symbol -|k|^alpha (dissipative sign folded in)."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("fractional order must be positive")

    @property
    def order(self) -> float:
        return float(self.alpha)

    def symbol(self, grid: GridSpec) -> np.ndarray:
        return -(grid.ksq ** (self.alpha / 2.0))


@dataclass(frozen=True)
class MixedTerm:
    """-(-Delta)^{alpha/2} D^l."""

    alpha: float
    l: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(int(x) for x in self.l))
        if not self.alpha > 0:
            raise ValueError("fractional order must be positive")

    @property
    def order(self) -> float:
        return float(self.alpha + sum(self.l))

    def symbol(self, grid: GridSpec) -> np.ndarray:
        return -(grid.ksq ** (self.alpha / 2.0)) * derivative_symbol(grid, self.l)


Term = Union[DerivativeTerm, FractionalLaplacian, MixedTerm]


@dataclass(frozen=True)
class ASpec:
    """Linear combination of multiplier terms, ``sum c_i * term_i``.

    The operator is classified once on a probe lattice when constructed:
    ``dispersive`` (purely imaginary symbol), ``diffusive`` (Re sigma <= 0) or
    ``rejected``.  A rejected spec can still be built and audited, but the
    A-flow refuses to run it.
    """

    terms: tuple[tuple[float, Term], ...] = ()
    classification: str = field(init=False, default=DISPERSIVE)

    def __post_init__(self):
        terms = tuple((float(c), t) for c, t in self.terms)
        object.__setattr__(self, "terms", terms)
        dims = {len(t.l) for _, t in terms if hasattr(t, "l")}
        if len(dims) > 1:
            raise ValueError(f"terms mix multi-indices of different lengths: {sorted(dims)}")
        probe = GridSpec(dims.pop() if dims else 1, 32)
        object.__setattr__(self, "classification", self.classify(probe))

    @property
    def dims(self) -> Optional[int]:
        for _, t in self.terms:
            if hasattr(t, "l"):
                return len(t.l)
        return None

    @property
    def order(self) -> float:
        """Highest number of derivatives occurring in A."""
        return max((t.order for c, t in self.terms if c != 0.0), default=0.0)

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c, _ in self.terms)

    def symbol(self, grid: GridSpec) -> np.ndarray:
        if self.dims is not None and self.dims != grid.dims:
            raise ValueError(f"operator is {self.dims}-dimensional, grid is {grid.dims}-dimensional")
        sym = np.zeros(grid.shape, dtype=np.complex128)
        for c, t in self.terms:
            sym = sym + c * t.symbol(grid)
        return sym

    def classify(self, grid: GridSpec) -> str:
        re = self.symbol(grid).real
        if np.all(re == 0.0):
            return DISPERSIVE
        if np.all(re <= 0.0):
            return DIFFUSIVE
        return REJECTED

    def __add__(self, other: "ASpec") -> "ASpec":
        return ASpec(self.terms + other.terms)

    def __repr__(self):
        body = " + ".join(f"{c:g}*{t}" for c, t in self.terms) or "0"
        return f"ASpec({body}; {self.classification})"


def apply_A(u: SpectralField, a: ASpec) -> SpectralField:
    return SpectralField(u.grid, a.symbol(u.grid) * u.coeffs)


# --------------------------------------------------------------------------
# velocity operator v
# --------------------------------------------------------------------------


class _VSpecBase:
    is_zero = False

    def multipliers(self, grid: GridSpec) -> np.ndarray:
        """Array of shape (dims, *grid.shape) with v_j(u)^ = m_j(k) u_hat(k)."""
        raise NotImplementedError

    def check_grid(self, grid: GridSpec) -> None:
        pass


@dataclass(frozen=True)
class Burgers(_VSpecBase):
    """v(u) = a u, one dimension only."""

    a: float = 1.0

    @property
    def is_zero(self) -> bool:
        return self.a == 0.0

    def check_grid(self, grid):
        if grid.dims != 1:
            raise ValueError(f"Burgers velocity requires dims = 1, got {grid.dims}")

    def multipliers(self, grid):
        self.check_grid(grid)
        return np.full((1,) + grid.shape, self.a, dtype=np.complex128)


@dataclass(frozen=True)
class SQG(_VSpecBase):
    """v(u) = curl (-Delta)^{-beta/2} u = (-d_y, d_x)(-Delta)^{-beta/2} u in 2D."""

    beta: float = 1.0

    def check_grid(self, grid):
        if grid.dims != 2:
            raise ValueError(f"SQG velocity requires dims = 2, got {grid.dims}")

    def multipliers(self, grid):
        self.check_grid(grid)
        ksq = grid.ksq
        inv = np.zeros(grid.shape)
        nz = ksq > 0
        inv[nz] = ksq[nz] ** (-self.beta / 2.0)
        m1 = -derivative_symbol(grid, (0, 1)) * inv
        m2 = derivative_symbol(grid, (1, 0)) * inv
        return np.stack([m1, m2])


def _named_kernel(name: str) -> Callable[[np.ndarray], np.ndarray]:
    if name == "gaussian":
        return lambda r: 1.0 - np.exp(-(r**2))
    if name == "exponential":
        return lambda r: 1.0 - np.exp(-r)
    raise ValueError(f"unknown kernel {name!r}; expected 'gaussian' or 'exponential'")


@dataclass(frozen=True)
class ConvolutionKernel(_VSpecBase):
    """v(u) = grad Phi * u with Phi periodised by sampling on the grid.

    ``kernel`` is either a name (``"gaussian"`` for 1 - exp(-|x|^2),
    ``"exponential"`` for 1 - exp(-|x|)) or an array of samples taken on the
    grid with the kernel origin at the domain midpoint.
    """

    kernel: Union[str, np.ndarray] = "gaussian"

    def __hash__(self):
        return hash(self.kernel if isinstance(self.kernel, str) else self.kernel.tobytes())

    def check_grid(self, grid):
        if grid.dims < 2:
            raise ValueError("convolution velocity requires dims >= 2")

    def samples(self, grid: GridSpec) -> np.ndarray:
        if isinstance(self.kernel, str):
            centred = [x - np.pi for x in grid.coordinates()]
            r = np.sqrt(sum(c**2 for c in centred))
            return _named_kernel(self.kernel)(r)
        arr = np.asarray(self.kernel, dtype=np.float64)
        if arr.shape != grid.shape:
            raise ValueError("sampled kernel does not match grid shape")
        return arr

    def describe(self) -> str:
        name = self.kernel if isinstance(self.kernel, str) else "sampled"
        return f"kernel={name}; periodised by midpoint-centred grid sampling"

    def multipliers(self, grid):
        self.check_grid(grid)
        # move the midpoint origin to index 0 before transforming
        phi = np.fft.ifftshift(self.samples(grid))
        phi_hat = grid.volume * np.fft.fftn(phi) / grid.size
        out = []
        for j in range(grid.dims):
            l = [0] * grid.dims
            l[j] = 1
            m = derivative_symbol(grid, l) * phi_hat
            m.flat[0] = 0.0
            out.append(m)
        return np.stack(out)


@dataclass(frozen=True, eq=False)
class CustomMultiplier(_VSpecBase):
    """User-supplied symbol table ``m`` of shape (dims, *grid.shape), or a
    callable ``grid -> table``."""

    table: Union[np.ndarray, Callable[[GridSpec], np.ndarray]]

    def multipliers(self, grid):
        m = self.table(grid) if callable(self.table) else self.table
        m = np.asarray(m, dtype=np.complex128)
        if m.shape != (grid.dims,) + grid.shape:
            raise ValueError(f"multiplier table shape {m.shape} incompatible with grid")
        return m


VSpec = Union[Burgers, SQG, ConvolutionKernel, CustomMultiplier]


def velocity(u: SpectralField, v: VSpec) -> list[SpectralField]:
    m = v.multipliers(u.grid)
    return [SpectralField(u.grid, mj * u.coeffs) for mj in m]


def divergence(components: Sequence[SpectralField]) -> SpectralField:
    grid = components[0].grid
    out = np.zeros(grid.shape, dtype=np.complex128)
    for j, c in enumerate(components):
        l = [0] * grid.dims
        l[j] = 1
        out = out + derivative_symbol(grid, l) * c.coeffs
    return SpectralField(grid, out)


def _dealiased_product(fc: np.ndarray, gc: np.ndarray, grid: GridSpec) -> np.ndarray:
    mask = grid.dealias_mask
    n = grid.size
    fx = np.fft.ifftn(np.where(mask, fc, 0.0) * n).real
    gx = np.fft.ifftn(np.where(mask, gc, 0.0) * n).real
    return np.where(mask, np.fft.fftn(fx * gx) / n, 0.0)


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pseudo-spectral product; both factors and the result are dealiased."""
    return SpectralField(f.grid, _dealiased_product(f.coeffs, g.coeffs, f.grid))


def leibniz_defect(f: SpectralField, g: SpectralField, a: ASpec) -> SpectralField:
    """A(fg) - f A(g) - g A(f)."""
    return apply_A(product(f, g), a) - product(f, apply_A(g, a)) - product(g, apply_A(f, a))


def commutator_AB(f: SpectralField, a: ASpec, v: VSpec) -> SpectralField:
    """[A, B](f) = -div( A(f v(f)) - f A(v(f)) - A(f) v(f) )."""
    vel = velocity(f, v)
    af = apply_A(f, a)
    comps = []
    for vj in vel:
        comps.append(apply_A(product(f, vj), a) - product(f, apply_A(vj, a)) - product(af, vj))
    return -divergence(comps)


# --------------------------------------------------------------------------
# admissibility audit
# --------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    classification: str
    trials: int
    commutativity_residual: float
    divergence_ratio: float
    energy_sign: float
    commutator_constant: float
    commutator_index: int
    degenerate: bool = False
    diagnosis: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    # pass thresholds
    commutativity_tol: float = 1e-12
    sign_tol: float = 1e-12

    @property
    def conservative(self) -> bool:
        return self.classification == DISPERSIVE

    @property
    def passed(self) -> bool:
        return (
            self.classification != REJECTED
            and self.commutativity_residual <= self.commutativity_tol
            and self.energy_sign <= self.sign_tol
            and math.isfinite(self.commutator_constant)
            and math.isfinite(self.divergence_ratio)
        )

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "trials": self.trials,
            "commutativity_residual": self.commutativity_residual,
            "divergence_ratio": self.divergence_ratio,
            "energy_sign": self.energy_sign,
            "commutator_constant": self.commutator_constant,
            "commutator_index": self.commutator_index,
            "degenerate": self.degenerate,
            "passed": self.passed,
            "diagnosis": list(self.diagnosis),
            "metadata": dict(self.metadata),
        }


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0.0:
        return (0.0 if num == 0.0 else math.inf), True
    return num / den, False


def check_admissibility(
    a: ASpec,
    v: VSpec,
    grid: GridSpec,
    trials: int = 50,
    seed: int = 0,
    commutator_index: int = 3,
    decay: float = 6.0,
    fields: Optional[Sequence[SpectralField]] = None,
) -> AdmissibilityReport:
    """Sample the admissibility conditions of (A, v) on random smooth fields.

    Reported quantities, each a maximum over the trials:

    * commutativity residual ``max_i |A v_i(u) - v_i A(u)|_2 / |u|_2``
    * ``|div v(u)|_2 / |u|_2``
    * ``int A(u) u dx / |u|_2^2`` (must be <= 0 up to roundoff)
    * sample constant of the Leibniz-defect estimate in H^kc against
      H^{kc + max(order, 2) - 1} norms of the two factors.

    ``fields`` overrides the random generator (used for degenerate inputs).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v.check_grid(grid)
    classification = a.classify(grid)
    diagnosis: list[str] = []
    if classification == REJECTED:
        sym = a.symbol(grid)
        k_bad = np.unravel_index(int(np.argmax(sym.real)), grid.shape)
        diagnosis.append(
            f"symbol has positive real part {sym.real[k_bad]:.3e} at index {k_bad}: "
            "operator is neither conservative nor diffusive"
        )

    if fields is None:
        pool = [
            to_spectral(random_band_limited_field(grid, seed + i, decay))
            for i in range(2 * trials)
        ]
    else:
        pool = list(fields)
        if len(pool) < 2 * trials:
            pool = (pool * (2 * trials // max(len(pool), 1) + 1))[: 2 * trials]

    sym = a.symbol(grid)
    m = v.multipliers(grid)
    div_sym = sum(derivative_symbol(grid, tuple(int(i == j) for i in range(grid.dims))) * m[j]
                  for j in range(grid.dims))
    kc = commutator_index
    high = kc + max(a.order, 2.0) - 1.0

    comm = div = sign = const = 0.0
    degenerate = False
    for t in range(trials):
        u = pool[t]
        nu = l2_norm(u)
        for mj in m:
            lhs = sym * (mj * u.coeffs)
            rhs = mj * (sym * u.coeffs)
            r, d = _ratio(l2_norm(SpectralField(grid, lhs - rhs)), nu)
            comm, degenerate = max(comm, r), degenerate or d
        r, d = _ratio(l2_norm(SpectralField(grid, div_sym * u.coeffs)), nu)
        div, degenerate = max(div, r), degenerate or d
        # physical-space quadrature, independent of the symbol's real part
        au = np.fft.ifftn(sym * u.coeffs * grid.size).real
        ux = np.fft.ifftn(u.coeffs * grid.size).real
        r, d = _ratio(grid.cell_volume * float(np.sum(au * ux)), nu**2)
        sign, degenerate = max(sign, r), degenerate or d

        f, g = pool[t], pool[trials + t]
        num = sobolev_norm(leibniz_defect(f, g, a), kc)
        r, d = _ratio(num, sobolev_norm(f, high) * sobolev_norm(g, high))
        const, degenerate = max(const, r), degenerate or d

    if degenerate:
        diagnosis.append("degenerate input: zero denominator guarded")
    metadata = {"aspec": repr(a), "vspec": type(v).__name__, "grid": f"{grid.dims}D n={grid.n}"}
    if isinstance(v, ConvolutionKernel):
        metadata["kernel"] = v.describe()
    return AdmissibilityReport(
        classification=classification,
        trials=trials,
        commutativity_residual=comm,
        divergence_ratio=div,
        energy_sign=sign,
        commutator_constant=const,
        commutator_index=kc,
        degenerate=degenerate,
        diagnosis=diagnosis,
        metadata=metadata,
    )
