"""Grids, transforms and Fourier multipliers on the strip T^1 x [-L2, L2).

Arrays are stored with shape ``(n2, n1)``: axis 0 runs over the vertical
coordinate x2, axis 1 over the periodic horizontal coordinate x1, so a
row-major flattening has x1 varying fastest.  Spectral coefficients use the
same layout in FFT order and are the true Fourier coefficients with respect
to the physical coordinates, i.e.

    f(x1, x2) = sum_{j,k} c(j, k) exp(i (xi1(j) x1 + xi2(k) x2)),

so the constant field 1 has c(0, 0) = 1 and cos(x1) has c(+-1, 0) = 1/2.

Odd multipliers (derivatives, Riesz transforms) vanish on the Nyquist row and
column; that is the only choice that keeps real fields real.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridMismatchError",
    "GridSpec",
    "PhysicalField",
    "SpectralField",
    "forward_transform",
    "inverse_transform",
    "fractional_laplacian",
    "riesz",
    "derivative",
    "velocity_from_theta",
    "spectral_divergence",
    "horizontal_mean",
    "dealias",
    "inner_product",
    "l2_norm",
    "sobolev_norm",
    "resample",
    "random_field",
]

ZERO_MODE_TOL = 1e-14


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform collocation grid on T^1 x [-L2, L2) with periodic wrap in x2.

    Parameters
    ----------
    n1, n2 : int
        Even number of points in x1 and x2 (at least 4).
    L1 : float
        Horizontal period.
    L2 : float
        Vertical half-length; the vertical period is ``2 * L2``.
    """

    n1: int
    n2: int
    L1: float = 2 * np.pi
    L2: float = 8 * np.pi

    def __post_init__(self):
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n}")
        if not (self.L1 > 0 and self.L2 > 0 and np.isfinite(self.L1) and np.isfinite(self.L2)):
            raise ValueError("L1 and L2 must be positive and finite")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def area(self) -> float:
        return self.L1 * 2 * self.L2

    @property
    def cell_area(self) -> float:
        return self.area / (self.n1 * self.n2)

    @property
    def dx(self) -> float:
        """Smallest grid spacing."""
        return min(self.L1 / self.n1, 2 * self.L2 / self.n2)

    @cached_property
    def j(self) -> np.ndarray:
        return np.fft.fftfreq(self.n1, 1.0 / self.n1).astype(int)

    @cached_property
    def k(self) -> np.ndarray:
        return np.fft.fftfreq(self.n2, 1.0 / self.n2).astype(int)

    @cached_property
    def xi1(self) -> np.ndarray:
        """Horizontal angular frequencies, shape ``(1, n1)``."""
        return (2 * np.pi / self.L1 * self.j)[None, :]

    @cached_property
    def xi2(self) -> np.ndarray:
        """Vertical angular frequencies, shape ``(n2, 1)``."""
        return (np.pi / self.L2 * self.k)[:, None]

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.xi1**2 + self.xi2**2)

    @cached_property
    def x1(self) -> np.ndarray:
        return (self.L1 / self.n1 * np.arange(self.n1))[None, :]

    @cached_property
    def x2(self) -> np.ndarray:
        return (-self.L2 + 2 * self.L2 / self.n2 * np.arange(self.n2))[:, None]

    @cached_property
    def _phase(self) -> np.ndarray:
        # the x2 grid starts at -L2, which contributes exp(i*xi2*L2) = (-1)^k
        return np.where(self.k % 2 == 0, 1.0, -1.0)[:, None]

    @cached_property
    def deriv1(self) -> np.ndarray:
        return 1j * np.where(self.j == -self.n1 // 2, 0.0, self.xi1)

    @cached_property
    def deriv2(self) -> np.ndarray:
        return 1j * np.where(self.k[:, None] == -self.n2 // 2, 0.0, self.xi2)

    @cached_property
    def inv_kmag(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.divide(1.0, self.kmag, out=out, where=self.kmag > 0)
        return out

    @cached_property
    def riesz1(self) -> np.ndarray:
        return self.deriv1 * self.inv_kmag

    @cached_property
    def riesz2(self) -> np.ndarray:
        return self.deriv2 * self.inv_kmag

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep1 = np.abs(self.j) <= self.n1 / 3
        keep2 = np.abs(self.k) <= self.n2 / 3
        return keep2[:, None] & keep1[None, :]

    @cached_property
    def zonal_mask(self) -> np.ndarray:
        return np.broadcast_to(self.j[None, :] == 0, self.shape)

    def strip_mask(self, fraction: float, outer: bool = False) -> np.ndarray:
        """Rows of the grid with ``|x2| <= fraction * L2`` (or the complement)."""
        inner = np.abs(self.x2[:, 0]) <= fraction * self.L2 * (1 + 1e-12)
        return ~inner if outer else inner


def _check_same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Real values on the collocation points, shape ``(n2, n1)``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> PhysicalField:
        """Sample ``func(x1, x2)`` on the grid (arguments broadcast)."""
        values = np.broadcast_to(func(grid.x1, grid.x2), grid.shape)
        return cls(grid, np.array(values, dtype=float))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field, FFT-ordered, shape ``(n2, n1)``."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {coeffs.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, grid: GridSpec) -> SpectralField:
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def coeff(self, j: int, k: int) -> complex:
        """Coefficient of the mode exp(i(xi1(j) x1 + xi2(k) x2))."""
        return complex(self.coeffs[k % self.grid.n2, j % self.grid.n1])

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def norm(self) -> float:
        return l2_norm(self)


def to_spectral(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Array-level forward transform used by the time stepper."""
    return np.fft.fft2(values) * (grid._phase / (grid.n1 * grid.n2))


def to_physical(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Array-level inverse transform; returns the real part."""
    return np.fft.ifft2(coeffs * grid._phase).real * (grid.n1 * grid.n2)


def forward_transform(f: PhysicalField) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("non-finite values in physical field")
    return SpectralField(f.grid, to_spectral(f.grid, f.values))


def inverse_transform(g: SpectralField) -> PhysicalField:
    if not np.all(np.isfinite(g.coeffs)):
        raise ValueError("non-finite coefficients in spectral field")
    return PhysicalField(g.grid, to_physical(g.grid, g.coeffs))


def fractional_laplacian(g: SpectralField, s: float) -> SpectralField:
    """Apply Lambda^s, the multiplier |xi|^s; the zero mode always maps to 0."""
    grid = g.grid
    if s < 0:
        c0 = abs(g.coeffs[0, 0])
        if c0 > ZERO_MODE_TOL * max(1.0, float(np.max(np.abs(g.coeffs)))):
            raise ValueError("fractional inverse of non-mean-free field")
    symbol = np.zeros(grid.shape)
    nz = grid.kmag > 0
    symbol[nz] = grid.kmag[nz] ** s
    return SpectralField(grid, g.coeffs * symbol)


def riesz(g: SpectralField, axis: int) -> SpectralField:
    """Riesz transform R_axis with symbol i xi_axis / |xi| (axis is 1 or 2)."""
    if axis == 1:
        symbol = g.grid.riesz1
    elif axis == 2:
        symbol = g.grid.riesz2
    else:
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    return SpectralField(g.grid, g.coeffs * symbol)


def derivative(g: SpectralField, axis: int) -> SpectralField:
    """Spectral partial derivative along x1 or x2."""
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    symbol = g.grid.deriv1 if axis == 1 else g.grid.deriv2
    return SpectralField(g.grid, g.coeffs * symbol)


def velocity_from_theta(g: SpectralField) -> tuple[SpectralField, SpectralField]:
    """u = R^perp theta = (-R2 theta, R1 theta)."""
    grid = g.grid
    return (
        SpectralField(grid, -grid.riesz2 * g.coeffs),
        SpectralField(grid, grid.riesz1 * g.coeffs),
    )


def spectral_divergence(u1: SpectralField, u2: SpectralField) -> SpectralField:
    grid = _check_same_grid(u1, u2)
    return SpectralField(grid, grid.deriv1 * u1.coeffs + grid.deriv2 * u2.coeffs)


def horizontal_mean(g: SpectralField) -> SpectralField:
    """Average over x1 with measure dx1/L1: keeps the xi1 = 0 column only."""
    out = np.zeros_like(g.coeffs)
    out[:, 0] = g.coeffs[:, 0]
    return SpectralField(g.grid, out)


def dealias(g: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with |j| > n1/3 or |k| > n2/3."""
    return SpectralField(g.grid, np.where(g.grid.dealias_mask, g.coeffs, 0.0))


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 inner product computed from coefficients (Parseval)."""
    grid = _check_same_grid(f, g)
    return float(grid.area * np.real(np.vdot(g.coeffs, f.coeffs)))


def l2_norm(g: SpectralField) -> float:
    return float(np.sqrt(g.grid.area * np.sum(np.abs(g.coeffs) ** 2)))


def sobolev_norm(g: SpectralField, s: float) -> float:
    """Inhomogeneous H^s norm with weight (1 + |xi|^2)^(s/2)."""
    weight = (1 + g.grid.kmag**2) ** s
    return float(np.sqrt(g.grid.area * np.sum(weight * np.abs(g.coeffs) ** 2)))


def resample(g: SpectralField, grid: GridSpec) -> SpectralField:
    """Truncate or zero-pad ``g`` onto another grid with the same periods.

    Nyquist modes of the source are dropped so the result stays real.
    """
    if (grid.L1, grid.L2) != (g.grid.L1, g.grid.L2):
        raise GridMismatchError("resample needs equal periods")
    src = g.grid
    out = np.zeros(grid.shape, dtype=complex)
    k_keep = np.abs(src.k) < min(src.n2, grid.n2) // 2
    j_keep = np.abs(src.j) < min(src.n1, grid.n1) // 2
    rows = src.k[k_keep] % grid.n2
    cols = src.j[j_keep] % grid.n1
    out[np.ix_(rows, cols)] = g.coeffs[np.ix_(k_keep, j_keep)]
    return SpectralField(grid, out)


def random_field(
    grid: GridSpec,
    rng: np.random.Generator,
    *,
    decay: float | None = None,
    nyquist: bool = True,
    mean_free: bool = False,
) -> SpectralField:
    """Seeded random real field.

    White noise on the grid by default.  ``decay`` multiplies the coefficients
    by ``(1 + |xi|^2)^(-decay/2)`` to produce smooth fields; ``nyquist=False``
    removes the Nyquist row and column.
    """
    g = to_spectral(grid, rng.standard_normal(grid.shape))
    if decay is not None:
        g = g * (1 + grid.kmag**2) ** (-decay / 2)
    if not nyquist:
        g[grid.n2 // 2, :] = 0
        g[:, grid.n1 // 2] = 0
    if mean_free:
        g[0, 0] = 0
    return SpectralField(grid, g)
