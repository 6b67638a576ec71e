"""Closed-form evolution of the two limit systems on zonal (x1-independent) profiles.

Fast rotation with fixed viscosity: d/dt theta + nu Lambda_2 theta = 0, i.e.
each vertical mode decays like exp(-nu |xi2| t).  Combined fast-rotation and
inviscid scaling: d/dt theta = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import GridSpec, SpectralField

__all__ = [
    "ZonalProfile",
    "project_to_zonal",
    "embed_zonal",
    "evolve_fast_rotation_limit",
    "evolve_combined_limit",
]


@dataclass(frozen=True, eq=False)
class ZonalProfile:
    """Coefficients of an x2-only real function, indexed by k in FFT order."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.grid.n2,):
            raise ValueError(f"zonal coeffs must have shape ({self.grid.n2},), got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    def values(self) -> np.ndarray:
        """Profile sampled at the grid's x2 points."""
        return np.fft.ifft(self.coeffs * self.grid._phase[:, 0]).real * self.grid.n2

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray) -> ZonalProfile:
        return cls(grid, np.fft.fft(values) * grid._phase[:, 0] / grid.n2)

    def norm(self) -> float:
        """L^2 norm of the profile viewed as a field on the whole strip."""
        return float(np.sqrt(self.grid.area * np.sum(np.abs(self.coeffs) ** 2)))

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(k), float(c.real), float(c.imag)) for k, c in zip(self.grid.k, self.coeffs)]


def project_to_zonal(g: SpectralField) -> ZonalProfile:
    return ZonalProfile(g.grid, g.coeffs[:, 0].copy())


def embed_zonal(p: ZonalProfile) -> SpectralField:
    out = np.zeros(p.grid.shape, dtype=complex)
    out[:, 0] = p.coeffs
    return SpectralField(p.grid, out)


def evolve_fast_rotation_limit(p: ZonalProfile, nu: float, t: float) -> ZonalProfile:
    """exp(-nu Lambda_2 t) applied to the profile."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")
    xi2 = np.abs(p.grid.xi2[:, 0])
    return ZonalProfile(p.grid, p.coeffs * np.exp(-nu * xi2 * t))


def evolve_combined_limit(p: ZonalProfile, t: float) -> ZonalProfile:
    """The combined limit freezes the profile."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return ZonalProfile(p.grid, p.coeffs.copy())
