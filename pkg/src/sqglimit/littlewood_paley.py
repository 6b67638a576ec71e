"""Littlewood-Paley blocks, Besov norms and measured Bernstein/commutator bounds.

The radial cutoff ``chi`` equals 1 on [0, 1], vanishes on [2, inf) and is
built from the normalised integral of exp(-1/(y(1-y))).  Blocks follow the
usual inhomogeneous convention

    Delta_{-1} = chi(D),   Delta_j = chi(2^{-j-1} D) - chi(2^{-j} D)  (j >= 0),
    S_j = chi(2^{-j} D) = sum_{k <= j-1} Delta_k,

so block j >= 0 lives on the annulus 2^j <= |xi| <= 2^{j+2}.

Constants in the inequality checks are never assumed: each check fits its
constant on a calibration set and asserts the holdout set stays within a
fixed headroom factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spectral import (
    GridSpec,
    PhysicalField,
    SpectralField,
    _check_same_grid,
    sobolev_norm,
    to_physical,
    to_spectral,
)

__all__ = [
    "chi",
    "phi",
    "DyadicFamily",
    "BesovIndex",
    "dyadic_block",
    "low_freq_cutoff",
    "lp_norm",
    "besov_norm",
    "lp_sobolev_norm",
    "embeds_in_lipschitz",
    "norm_equivalence_constants",
    "BernsteinReport",
    "BernsteinCheck",
    "bernstein_ratios",
    "bernstein_check",
    "commutator_block",
    "CommutatorProfile",
    "CommutatorCheck",
    "commutator_profile",
    "commutator_check",
]

HEADROOM = 1.5

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(80)
_NODES = 0.5 * (_NODES + 1)
_WEIGHTS = 0.5 * _WEIGHTS


def _bump(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = (y > 0) & (y < 1)
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (yi * (1 - yi)))
    return out


_BUMP_MASS = float(np.sum(_WEIGHTS * _bump(_NODES)))


def _smooth_step(x):
    """Normalised running integral of the bump, 0 at x = 0 and 1 at x = 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    vals = _bump(x[..., None] * _NODES) @ _WEIGHTS
    return x * vals / _BUMP_MASS


def chi(r):
    """Radial cutoff: 1 on [0, 1], 0 on [2, inf), smooth and non-increasing."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 1, 1.0, 0.0)
    ramp = (r > 1) & (r < 2)
    if np.any(ramp):
        out[ramp] = 1.0 - _smooth_step(r[ramp] - 1.0)
    return out


def phi(r):
    """Annulus profile chi(r/2) - chi(r), supported in [1, 4]."""
    r = np.asarray(r, dtype=float)
    return chi(r / 2) - chi(r)


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (1 <= v <= math.inf):
                raise ValueError(f"{name} must lie in [1, inf], got {v}")


class DyadicFamily:
    """Block masks on one grid.  Masks are computed once and never mutated."""

    jmin = -1

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self._masks: dict[int, np.ndarray] = {}

    @cached_property
    def jmax(self) -> int:
        rmax = float(self.grid.kmag.max())
        # block j is nonempty iff some lattice radius lies strictly inside (2^j, 2^{j+2})
        j = -1
        while 2.0 ** (j + 1) < rmax:
            j += 1
        return j

    @property
    def indices(self) -> range:
        return range(self.jmin, self.jmax + 1)

    def block_mask(self, j: int) -> np.ndarray:
        if j <= -2:
            return np.zeros(self.grid.shape)
        if j not in self._masks:
            km = self.grid.kmag
            if j == -1:
                mask = chi(km)
            else:
                mask = chi(km / 2.0 ** (j + 1)) - chi(km / 2.0**j)
            mask.setflags(write=False)
            self._masks[j] = mask
        return self._masks[j]

    def cutoff_mask(self, j: int) -> np.ndarray:
        return chi(self.grid.kmag / 2.0**j)


def dyadic_block(g: SpectralField, j: int, fam: DyadicFamily) -> SpectralField:
    return SpectralField(g.grid, g.coeffs * fam.block_mask(j))


def low_freq_cutoff(g: SpectralField, j: int, fam: DyadicFamily, method: str = "direct") -> SpectralField:
    """S_j g, either from the chi(2^{-j} .) mask or by summing blocks k <= j-1."""
    if j < 0:
        raise ValueError(f"low frequency cutoff needs j >= 0, got {j}")
    if method == "direct":
        mask = fam.cutoff_mask(j)
    elif method == "blocks":
        mask = sum(fam.block_mask(k) for k in range(-1, j))
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralField(g.grid, g.coeffs * mask)


def lp_norm(f: PhysicalField | np.ndarray, p: float, grid: GridSpec | None = None) -> float:
    """L^p norm by rectangle-rule quadrature; L^inf is the grid maximum."""
    if isinstance(f, PhysicalField):
        grid, values = f.grid, f.values
    else:
        values = f
    a = np.abs(values)
    if p == math.inf:
        return float(a.max())
    return float((np.sum(a**p) * grid.cell_area) ** (1.0 / p))


def _block_lp_norms(g: SpectralField, p: float, fam: DyadicFamily) -> np.ndarray:
    return np.array(
        [lp_norm(to_physical(g.grid, g.coeffs * fam.block_mask(j)), p, g.grid) for j in fam.indices]
    )


def besov_norm(g: SpectralField, idx: BesovIndex, fam: DyadicFamily) -> float:
    """l^r over j >= -1 of 2^{js} ||Delta_j g||_{L^p}."""
    _check_same_grid(g, fam)
    if idx.p == 2:
        # Parseval avoids one inverse transform per block
        norms = np.sqrt(
            [g.grid.area * np.sum(np.abs(g.coeffs * fam.block_mask(j)) ** 2) for j in fam.indices]
        )
    else:
        norms = _block_lp_norms(g, idx.p, fam)
    seq = 2.0 ** (idx.s * np.arange(fam.jmin, fam.jmax + 1)) * norms
    if idx.r == math.inf:
        return float(seq.max())
    return float(np.sum(seq**idx.r) ** (1.0 / idx.r))


def lp_sobolev_norm(g: SpectralField, s: float, fam: DyadicFamily) -> float:
    """H^s norm through its B^s_{2,2} equivalent."""
    return besov_norm(g, BesovIndex(s, 2, 2), fam)


def embeds_in_lipschitz(idx: BesovIndex, d: int = 2) -> bool:
    """Whether B^s_{p,r} embeds in W^{1,inf}: s > 1 + d/p, or equality with r = 1."""
    crit = 1 + d / idx.p
    return idx.s > crit or (idx.s == crit and idx.r == 1)


def norm_equivalence_constants(fields, s: float, fam: DyadicFamily) -> tuple[float, float]:
    """Smallest and largest ratio ||g||_{B^s_{2,2}} / ||g||_{H^s} over ``fields``."""
    ratios = [lp_sobolev_norm(g, s, fam) / sobolev_norm(g, s) for g in fields]
    return float(min(ratios)), float(max(ratios))


def _grad_magnitude(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    gx = to_physical(grid, grid.deriv1 * coeffs)
    gy = to_physical(grid, grid.deriv2 * coeffs)
    return np.hypot(gx, gy)


@dataclass
class BernsteinReport:
    """Measured ratios for one band.

    ``ratio_*`` is ||grad u||_q / (2^{j(1 + 2(1/p - 1/q))} ||u||_p); ``deriv_*``
    is ||grad u||_p / (2^j ||u||_p), the two-sided derivative bound.
    """

    j: int
    p: float
    q: float
    ratio_max: float
    ratio_min: float
    deriv_max: float
    deriv_min: float
    trials: int
    fitted_C: float | None = None

    def row(self) -> tuple:
        return (self.j, self.p, self.q, self.ratio_max, self.ratio_min, self.fitted_C)


def bernstein_ratios(
    grid: GridSpec,
    band: int,
    p: float,
    q: float,
    trials: int,
    seed: int = 0,
    fam: DyadicFamily | None = None,
) -> BernsteinReport:
    """Measure Bernstein ratios for random fields supported in block ``band``."""
    if q < p:
        raise ValueError("Bernstein check needs q >= p")
    fam = fam or DyadicFamily(grid)
    mask = fam.block_mask(band)
    if band < -1 or not np.any(mask > 0):
        raise ValueError(f"empty annulus for band {band} on {grid}")
    rng = np.random.default_rng(seed)
    scale = 2.0 ** (band * (1 + 2 * (1 / p - (0 if q == math.inf else 1 / q))))
    ratios, derivs = [], []
    for _ in range(trials):
        c = to_spectral(grid, rng.standard_normal(grid.shape)) * mask
        c[grid.n2 // 2, :] = 0
        c[:, grid.n1 // 2] = 0
        u = to_physical(grid, c)
        up = lp_norm(u, p, grid)
        if up == 0:
            continue
        grad = _grad_magnitude(grid, c)
        ratios.append(lp_norm(grad, q, grid) / (scale * up))
        derivs.append(lp_norm(grad, p, grid) / (2.0**band * up))
    if not ratios:
        raise ValueError("every trial produced a zero field")
    return BernsteinReport(
        band, p, q, max(ratios), min(ratios), max(derivs), min(derivs), len(ratios)
    )


@dataclass
class BernsteinCheck:
    calibration: list[BernsteinReport]
    holdout: list[BernsteinReport]
    fitted_C: float
    deriv_low: float
    deriv_high: float
    headroom: float = HEADROOM
    passed: bool = field(init=False)

    def __post_init__(self):
        h = self.headroom
        self.passed = all(
            r.ratio_max <= h * self.fitted_C
            and r.deriv_max <= h * self.deriv_high
            and r.deriv_min >= self.deriv_low / h
            for r in self.holdout
        )

    def rows(self) -> list[tuple]:
        return [r.row() for r in self.calibration + self.holdout]


def bernstein_check(
    grid: GridSpec,
    p: float,
    q: float,
    calibration_bands=(1, 2),
    holdout_bands=(3,),
    trials: int = 100,
    seed: int = 0,
    headroom: float = HEADROOM,
) -> BernsteinCheck:
    """Fit the Bernstein constants on calibration bands, assert on holdout bands."""
    fam = DyadicFamily(grid)
    calib = [bernstein_ratios(grid, j, p, q, trials, seed + j, fam) for j in calibration_bands]
    hold = [bernstein_ratios(grid, j, p, q, trials, seed + j, fam) for j in holdout_bands]
    fitted = max(r.ratio_max for r in calib)
    for r in calib + hold:
        r.fitted_C = fitted
    return BernsteinCheck(
        calib,
        hold,
        fitted,
        deriv_low=min(r.deriv_min for r in calib),
        deriv_high=max(r.deriv_max for r in calib),
        headroom=headroom,
    )


def _advect(grid: GridSpec, u1: np.ndarray, u2: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    prod = u1 * to_physical(grid, grid.deriv1 * coeffs) + u2 * to_physical(grid, grid.deriv2 * coeffs)
    return to_spectral(grid, prod) * grid.dealias_mask


def commutator_block(
    u: tuple[PhysicalField, PhysicalField], theta: SpectralField, j: int, fam: DyadicFamily
) -> SpectralField:
    """[u.grad, Delta_j] theta = Delta_j(u.grad theta) - u.grad(Delta_j theta), dealiased."""
    grid = _check_same_grid(u[0], u[1], theta, fam)
    u1, u2 = u[0].values, u[1].values
    mask = fam.block_mask(j)
    first = mask * _advect(grid, u1, u2, theta.coeffs)
    second = _advect(grid, u1, u2, mask * theta.coeffs)
    return SpectralField(grid, first - second)


@dataclass
class CommutatorProfile:
    """Normalised commutator sizes m_j = ||[u.grad, Delta_j] theta|| / bound.

    ``C`` is the l^2 norm of (m_j), so ``c = m / C`` lies on the unit sphere of l^2.
    """

    m: np.ndarray
    bound: float

    @property
    def C(self) -> float:
        return float(np.linalg.norm(self.m))

    @property
    def c(self) -> np.ndarray:
        return self.m / self.C if self.C > 0 else self.m


def commutator_profile(theta: SpectralField, s: float, fam: DyadicFamily) -> CommutatorProfile:
    """Commutator sizes for the SQG velocity u = R^perp theta."""
    grid = theta.grid
    c1 = -grid.riesz2 * theta.coeffs
    c2 = grid.riesz1 * theta.coeffs
    u1, u2 = to_physical(grid, c1), to_physical(grid, c2)
    th = to_physical(grid, theta.coeffs)
    u_hs = math.hypot(sobolev_norm(SpectralField(grid, c1), s), sobolev_norm(SpectralField(grid, c2), s))
    bound = float(np.abs(th).max()) * u_hs + sobolev_norm(theta, s) * float(np.hypot(u1, u2).max())
    uu = (PhysicalField(grid, u1), PhysicalField(grid, u2))
    sizes = []
    for j in fam.indices:
        comm = commutator_block(uu, theta, j, fam)
        sizes.append(math.sqrt(grid.area * float(np.sum(np.abs(comm.coeffs) ** 2))))
    m = np.array(sizes) / bound if bound > 0 else np.zeros(len(sizes))
    return CommutatorProfile(m, bound)


@dataclass
class CommutatorCheck:
    calibration: list[CommutatorProfile]
    holdout: list[CommutatorProfile]
    fitted_C: float
    headroom: float = HEADROOM
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(
            p.C <= self.headroom * self.fitted_C and abs(np.linalg.norm(p.c) - 1) < 1e-12
            for p in self.holdout
            if p.C > 0
        )

    def rows(self, jmin: int = -1) -> list[tuple]:
        m = np.array([p.m for p in self.calibration + self.holdout])
        return [
            (jmin + i, 2, 2, float(m[:, i].max()), float(m[:, i].min()), self.fitted_C)
            for i in range(m.shape[1])
        ]


def commutator_check(states, s: float, fam: DyadicFamily, n_calibration: int, headroom: float = HEADROOM):
    """Fit C = max l^2 norm of (m_j) on the first states, assert on the rest."""
    profiles = [commutator_profile(th, s, fam) for th in states]
    calib, hold = profiles[:n_calibration], profiles[n_calibration:]
    return CommutatorCheck(calib, hold, max(p.C for p in calib), headroom)
