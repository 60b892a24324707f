"""Periodic grid, Fourier transforms, spectral derivatives and Sobolev norms.

The domain is the torus [0, 2pi)^dims sampled on ``n`` points per dimension.
Spectral coefficients use the normalised convention

    u_hat(k) = N_total^{-1} sum_x u(x) exp(-i k.x)

so that a single mode ``exp(i k.x)`` has coefficient exactly one.  Coefficient
arrays are stored in the native FFT ordering of :mod:`numpy.fft`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "transform",
    "to_spectral",
    "to_real",
    "spectral_derivative",
    "dealias",
    "sobolev_norm",
    "l2_norm",
    "random_band_limited_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` points in each of ``dims`` dimensions."""

    dims: int
    n: int

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError(f"dims must be 1, 2 or 3, got {self.dims}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"points per dimension must be a power of two >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dims

    @property
    def size(self) -> int:
        return self.n**self.dims

    @property
    def volume(self) -> float:
        return (2.0 * np.pi) ** self.dims

    @property
    def cell_volume(self) -> float:
        return (2.0 * np.pi / self.n) ** self.dims

    @property
    def dealias_cutoff(self) -> int:
        """Largest retained |k_j| under the two-thirds rule."""
        return self.n // 3

    @cached_property
    def k1d(self) -> np.ndarray:
        # -n/2 .. n/2-1 in FFT ordering, exact integers
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable integer wavenumber arrays, one per dimension."""
        ks = []
        for j in range(self.dims):
            shape = [1] * self.dims
            shape[j] = self.n
            ks.append(self.k1d.reshape(shape))
        return tuple(ks)

    @cached_property
    def ksq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for k in self.wavenumbers:
            out = out + k**2
        return out

    @cached_property
    def nyquist_masks(self) -> tuple[np.ndarray, ...]:
        return tuple(k == -(self.n // 2) for k in self.wavenumbers)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for k in self.wavenumbers:
            mask = mask & (np.abs(k) <= self.n / 3)
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.dims), indexing="ij"))

    def mode_index(self, k: Sequence[int]) -> tuple[int, ...]:
        """Array index of wavevector ``k`` in FFT ordering."""
        if len(k) != self.dims:
            raise ValueError("wavevector length must equal dims")
        return tuple(int(kj) % self.n for kj in k)


@dataclass(frozen=True)
class RealField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {coeffs.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, scalar * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    @property
    def mean_mode(self) -> complex:
        return complex(self.coeffs.flat[0])

    def conjugate_symmetry_error(self) -> float:
        """max |c(-k) - conj(c(k))|, ignoring unpaired Nyquist planes."""
        c = self.coeffs
        flipped = c
        for ax in range(c.ndim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        diff = np.abs(flipped - np.conj(c))
        keep = np.ones(c.shape, dtype=bool)
        for m in self.grid.nyquist_masks:
            keep &= ~m
        return float(diff[keep].max()) if keep.any() else 0.0

    def to_real(self) -> RealField:
        return to_real(self)


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def to_spectral(field: RealField) -> SpectralField:
    if not np.all(np.isfinite(field.values)):
        raise ValueError("field contains non-finite values")
    return SpectralField(field.grid, np.fft.fftn(field.values) / field.grid.size)


def to_real(field: SpectralField) -> RealField:
    if not np.all(np.isfinite(field.coeffs)):
        raise ValueError("field contains non-finite coefficients")
    return RealField(field.grid, np.fft.ifftn(field.coeffs * field.grid.size).real)


def transform(field: Union[RealField, SpectralField], direction: str):
    """Forward (physical -> spectral) or inverse (spectral -> physical) transform."""
    if direction == "forward":
        if not isinstance(field, RealField):
            raise TypeError("forward transform expects a RealField")
        return to_spectral(field)
    if direction == "inverse":
        if not isinstance(field, SpectralField):
            raise TypeError("inverse transform expects a SpectralField")
        return to_real(field)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def derivative_symbol(grid: GridSpec, l: Sequence[int]) -> np.ndarray:
    """Multiplier prod_j (i k_j)^{l_j} with the Nyquist mode dropped for odd l_j.

    Powers of ``i`` are taken from a table so that real and imaginary parts
    are exact (no complex pow roundoff).
    """
    if len(l) != grid.dims:
        raise ValueError(f"multi-index {tuple(l)} incompatible with dims={grid.dims}")
    if any(int(lj) < 0 for lj in l):
        raise ValueError("multi-index entries must be non-negative")
    total = int(sum(l))
    sym = np.ones(grid.shape)
    for k, lj, nyq in zip(grid.wavenumbers, l, grid.nyquist_masks):
        lj = int(lj)
        if lj == 0:
            continue
        factor = k**lj
        if lj % 2:
            factor = np.where(nyq, 0.0, factor)
        sym = sym * factor
    return sym * (1, 1j, -1, -1j)[total % 4]


def spectral_derivative(field: SpectralField, l: Sequence[int]) -> SpectralField:
    return SpectralField(field.grid, derivative_symbol(field.grid, l) * field.coeffs)


def dealias(field: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with some |k_j| > n/3."""
    return SpectralField(field.grid, np.where(field.grid.dealias_mask, field.coeffs, 0.0))


def sobolev_norm(field: SpectralField, s: float) -> float:
    """( (2pi)^dims sum_k (1+|k|^2)^s |u_hat(k)|^2 )^{1/2}."""
    if s < 0:
        raise ValueError(f"Sobolev index must be non-negative, got {s}")
    grid = field.grid
    weight = (1.0 + grid.ksq) ** s
    return float(np.sqrt(grid.volume * np.sum(weight * np.abs(field.coeffs) ** 2)))


def l2_norm(field: SpectralField) -> float:
    return sobolev_norm(field, 0.0)


def random_band_limited_field(
    grid: GridSpec,
    seed: int,
    decay: float,
    zero_mean: bool = True,
    amplitude: float = 1.0,
    spectral: bool = False,
):
    """Smooth random field with spectrum ~ (1+|k|^2)^{-decay/2} for |k_j| <= n/4.

    The result is rescaled so that ``max |u| == amplitude``; the shape of the
    spectrum is unaffected by the rescaling.  With ``spectral=True`` the
    coefficients are returned directly, so modes outside the band are exactly
    zero rather than zero up to transform roundoff.
    """
    if decay <= 0:
        raise ValueError("decay must be positive")
    rng = np.random.default_rng(seed)
    band = np.ones(grid.shape, dtype=bool)
    for k in grid.wavenumbers:
        band &= np.abs(k) <= grid.n // 4
    magnitude = np.where(band, (1.0 + grid.ksq) ** (-decay / 2.0), 0.0)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=grid.shape)
    scale = rng.uniform(0.5, 1.5, size=grid.shape)
    coeffs = magnitude * scale * np.exp(1j * phase)
    # symmetrise: keep the Hermitian part, which is real in physical space
    flipped = coeffs
    for ax in range(grid.dims):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    coeffs = 0.5 * (coeffs + np.conj(flipped))
    if zero_mean:
        coeffs.flat[0] = 0.0
    values = np.fft.ifftn(coeffs * grid.size).real
    peak = np.max(np.abs(values))
    if peak > 0:
        values = values * (amplitude / peak)
        coeffs = coeffs * (amplitude / peak)
    if spectral:
        return SpectralField(grid, coeffs)
    return RealField(grid, values)
