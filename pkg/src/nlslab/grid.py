"""Periodic grids, fields and spectral differentiation.

The whole space is replaced by the box ``[-L, L)^d`` sampled with ``M``
points per axis.  Transforms follow the unnormalized-forward convention
(the inverse carries ``1/M`` per axis), so discrete Parseval reads

    dx^d * sum |f|^2 == dx^d / M^d * sum |fhat|^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

SUPPORTED_DIMS = (1, 2)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on ``[-L, L)^d``."""

    L: float
    M: int
    d: int = 1

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d not in SUPPORTED_DIMS:
            raise ConfigurationError("d", f"unsupported dimension {self.d!r}, expected one of {SUPPORTED_DIMS}")
        if not isinstance(self.M, (int, np.integer)) or not _is_power_of_two(int(self.M)) or self.M < 8:
            raise ConfigurationError("M", f"points per axis must be a power of two >= 8, got {self.M!r}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ConfigurationError("L", f"half-length must be positive, got {self.L!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "d", int(self.d))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.L, self.M, self.d) == (other.L, other.M, other.d)

    def __hash__(self):
        return hash((self.L, self.M, self.d))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @cached_property
    def x(self) -> np.ndarray:
        """1-D coordinate sequence, ``-L + j*dx``."""
        return -self.L + self.dx * np.arange(self.M)

    @cached_property
    def k(self) -> np.ndarray:
        """1-D wavenumbers in DFT bin order; the Nyquist bin is negative."""
        return 2.0 * np.pi * sfft.fftfreq(self.M, d=self.dx)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays broadcast to ``shape``."""
        return tuple(np.meshgrid(*([self.x] * self.d), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.k] * self.d), indexing="ij"))

    @cached_property
    def r2(self) -> np.ndarray:
        """``|x|^2`` on the grid."""
        return sum(c**2 for c in self.coords)

    @cached_property
    def k2(self) -> np.ndarray:
        """``|k|^2`` on the spectral grid."""
        return sum(kk**2 for kk in self.wavenumbers)

    @cached_property
    def high_band(self) -> np.ndarray:
        """Mask of spectral bins in the top third of the resolved band on any axis."""
        cutoff = (2.0 / 3.0) * np.pi * (self.M // 2) / self.L
        return np.any([np.abs(kk) > cutoff for kk in self.wavenumbers], axis=0)

    def guard_mask(self, margin: float) -> np.ndarray:
        edge = (1.0 - margin) * self.L
        return np.any([np.abs(c) > edge for c in self.coords], axis=0)

    def integrate(self, density: np.ndarray) -> float:
        return float(np.sum(density).real * self.cell_volume)


def make_grid(L: float, M: int, d: int = 1) -> Grid:
    return Grid(L=L, M=M, d=d)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, tagged with the time they represent."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.size != self.grid.M**self.grid.d:
            raise ConfigurationError(
                "values", f"expected {self.grid.M ** self.grid.d} samples, got {vals.size}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("values", "field contains non-finite samples")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time", float(self.time))

    def with_values(self, values: np.ndarray, time: float | None = None) -> Field:
        return Field(self.grid, values, self.time if time is None else time)

    def conj(self) -> Field:
        return self.with_values(np.conj(self.values))

    def __add__(self, other: Field) -> Field:
        return self.with_values(self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        return self.with_values(self.values - other.values)

    def __mul__(self, c: complex) -> Field:
        return self.with_values(c * self.values)

    __rmul__ = __mul__


def forward(values: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT over all axes."""
    return sfft.fftn(values)


def inverse(spectrum: np.ndarray) -> np.ndarray:
    """Inverse DFT carrying ``1/M`` per axis."""
    return sfft.ifftn(spectrum)


def transform_pair(f: Field) -> np.ndarray:
    """Spectrum of ``f`` in DFT bin order (see :func:`forward`)."""
    return forward(f.values)


def from_spectrum(spectrum: np.ndarray, grid: Grid, time: float = 0.0) -> Field:
    return Field(grid, inverse(spectrum), time)


def spectral_gradient(f: Field) -> tuple[Field, ...]:
    """Per-axis derivatives by multiplication with ``i k`` in transform space."""
    fhat = forward(f.values)
    return tuple(f.with_values(inverse(1j * kk * fhat)) for kk in f.grid.wavenumbers)


def gradient_arrays(values: np.ndarray, grid: Grid, fhat: np.ndarray | None = None) -> list[np.ndarray]:
    if fhat is None:
        fhat = forward(values)
    return [inverse(1j * kk * fhat) for kk in grid.wavenumbers]
