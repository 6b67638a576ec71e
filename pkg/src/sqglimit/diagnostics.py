"""Checks applied to trajectories: energy balance, Riesz orthogonality,
mean-flow and weak-form residuals, the zonal constraint, H^s growth and
eps-sweep convergence of the horizontal mean.

Time integrals use the trapezoid rule on the sample grid; space integrals
are spectral (Parseval) unless noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .limits import ZonalProfile, evolve_combined_limit, evolve_fast_rotation_limit, project_to_zonal
from .littlewood_paley import DyadicFamily, lp_sobolev_norm
from .solver import Combined, FixedViscosity, Trajectory, _flux_divergence, energy_tolerance
from .spectral import GridSpec, PhysicalField, SpectralField, forward_transform, to_physical

__all__ = [
    "InvalidTrajectoryError",
    "EnergyLedger",
    "energy_ledger",
    "riesz_orthogonality",
    "MeanResidual",
    "mean_equation_residual",
    "TestFunction",
    "WeakFormResult",
    "weak_form_residual",
    "constraint_residual",
    "time_average",
    "HsGrowthReport",
    "hs_growth",
    "ConvergenceReport",
    "convergence_metric",
    "limit_evolution",
    "D_FLOOR",
]

D_FLOOR = 1e-6


class InvalidTrajectoryError(ValueError):
    """The trajectory lost regularity and cannot be diagnosed."""


def _require_regular(traj: Trajectory):
    if not traj.regular:
        raise InvalidTrajectoryError(f"invalid trajectory: {traj.status}")


def _pair(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """<a, b>_{L^2} for stacks of coefficient arrays over the last two axes."""
    return grid.area * np.real(np.sum(a * np.conj(b), axis=(-2, -1)))


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


# ---------------------------------------------------------------------------
# energy


@dataclass(frozen=True)
class EnergyLedger:
    times: np.ndarray
    defects: np.ndarray
    tolerances: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.defects <= self.tolerances))

    @property
    def max_defect(self) -> float:
        return float(np.max(self.defects))

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.defects.tolist()))


def energy_ledger(traj: Trajectory, nu: float | None = None) -> EnergyLedger:
    """||theta(T)||^2 + 2 nu int_0^T ||Lambda^{1/2} theta||^2 - ||theta_0||^2 per sample.

    The time integral is a trapezoid over the samples, so with sparse
    sampling the quadrature error enters the defect.
    """
    _require_regular(traj)
    nu = traj.regime.viscosity if nu is None else nu
    t = traj.times
    l2 = traj.diagnostics["l2"]
    rate = 2 * nu * traj.diagnostics["h_half"] ** 2
    defects = l2**2 + _cumtrapz(rate, t) - l2[0] ** 2
    tol = np.array([energy_tolerance(traj.dt_used, ti) for ti in t])
    return EnergyLedger(t, defects, tol)


def riesz_orthogonality(theta: SpectralField, s: float) -> float:
    """<Lambda^s R1 theta, Lambda^s theta>, by grid quadrature in physical space."""
    g = theta.grid
    w = g.kmag**s if s != 0 else np.ones(g.shape)
    a = to_physical(g, w * g.riesz1 * theta.coeffs)
    b = to_physical(g, w * theta.coeffs)
    return float(np.sum(a * b) * g.cell_area)


# ---------------------------------------------------------------------------
# mean flow


@dataclass(frozen=True)
class MeanResidual:
    """Residual of the horizontally averaged equation at interior samples."""

    times: np.ndarray
    norms: np.ndarray
    riesz_mean_max: float

    @property
    def riesz_mean_zero(self) -> bool:
        return self.riesz_mean_max == 0.0

    @property
    def max_norm(self) -> float:
        return float(np.max(self.norms)) if self.norms.size else 0.0


def _zonal_flux(traj: Trajectory) -> np.ndarray:
    grid = traj.grid
    if traj.config.linear_only:
        return np.zeros((len(traj.times), grid.n2), dtype=complex)
    return np.stack([_flux_divergence(grid, s.coeffs, traj.config.dealias)[0][:, 0] for s in traj.snapshots])


def mean_equation_residual(traj: Trajectory, nu: float | None = None) -> MeanResidual:
    """d/dt <theta> + <div(theta u)> + nu Lambda <theta>, derivative by centred differences.

    Non-uniform sample spacing uses the second-order three-point formula.
    The transport term follows the trajectory's own configuration, so a
    linear-only run is checked against the linear mean equation.
    """
    _require_regular(traj)
    if len(traj.times) < 3:
        raise ValueError("need at least 3 samples")
    grid = traj.grid
    nu = traj.regime.viscosity if nu is None else nu
    stack = traj.coeff_stack
    means = stack[:, :, 0]
    riesz_mean = np.max(np.abs(grid.riesz1[:, 0] * means))
    dmdt = np.gradient(means, traj.times, axis=0)
    resid = dmdt + _zonal_flux(traj) + nu * np.abs(grid.xi2[:, 0]) * means
    norms = np.sqrt(grid.area * np.sum(np.abs(resid[1:-1]) ** 2, axis=1))
    return MeanResidual(traj.times[1:-1], norms, float(riesz_mean))


# ---------------------------------------------------------------------------
# weak formulation


def _bump(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    inside = np.abs(y) < 1
    out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Separable test function psi(t, x) = temporal(t) * spatial(x).

    ``temporal`` and ``temporal_dt`` are callables on arrays of times and
    must vanish for t >= T.
    """

    __test__ = False  # not a pytest class

    spatial: PhysicalField
    T: float
    temporal: Callable[[np.ndarray], np.ndarray]
    temporal_dt: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def zonal_bump(
        cls,
        grid: GridSpec,
        T: float,
        support: float = 0.8,
        center: float = 0.0,
        width: float | None = None,
        harmonic: int = 0,
    ) -> TestFunction:
        """Smooth bump in x2 with compact support inside ``|x2| <= support * L2``.

        With ``harmonic > 0`` the bump is multiplied by ``cos(2 pi harmonic x1 / L1)``,
        so the test function is no longer zonal. The temporal factor is
        ``(1 - t/T)**3`` on ``[0, T]``.
        """
        half = support * grid.L2 if width is None else width
        if abs(center) + half > support * grid.L2 + 1e-12:
            raise ValueError("bump leaves the allowed support")
        prof = _bump((grid.x2 - center) / half) * np.ones(grid.shape)
        if harmonic:
            prof = prof * np.cos(2 * np.pi * harmonic * grid.x1 / grid.L1)
        return cls(
            PhysicalField(grid, prof),
            T,
            lambda t: np.where(np.asarray(t) < T, (1 - np.asarray(t) / T) ** 3, 0.0),
            lambda t: np.where(np.asarray(t) < T, -3 / T * (1 - np.asarray(t) / T) ** 2, 0.0),
        )

    @property
    def grid(self) -> GridSpec:
        return self.spatial.grid

    def temporal_at(self, t: float) -> float:
        return float(np.asarray(self.temporal(np.array([t]))).ravel()[0])

    def x1_residual(self) -> float:
        """||d1 spatial|| / ||spatial||."""
        c = forward_transform(self.spatial).coeffs
        den = math.sqrt(np.sum(np.abs(c) ** 2))
        return float(math.sqrt(np.sum(np.abs(self.grid.deriv1 * c) ** 2)) / den) if den > 0 else 0.0

    def outer_max(self, fraction: float = 0.2) -> float:
        outer = self.grid.strip_mask(1 - fraction, outer=True)
        return float(np.max(np.abs(self.spatial.values[outer]), initial=0.0))

    @property
    def zonal(self) -> bool:
        return self.x1_residual() <= 1e-13

    def validate(self, require_zonal: bool = True) -> None:
        if require_zonal and not self.zonal:
            raise ValueError(f"test function depends on x1 (residual {self.x1_residual():.2e})")
        if self.outer_max() != 0.0:
            raise ValueError("test function is not supported away from the vertical boundary")
        if self.temporal_at(self.T) != 0:
            raise ValueError("temporal factor must vanish at T")


@dataclass(frozen=True)
class WeakFormResult:
    residual: float
    scale: float
    riesz_term: float

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0 else abs(self.residual)


def weak_form_residual(
    traj: Trajectory,
    psi: TestFunction,
    regime=None,
    include_riesz: bool = True,
    require_zonal: bool = True,
) -> WeakFormResult:
    """Residual of the space-time weak formulation tested against ``psi``:

        -int int (theta psi_t + theta u . grad psi - nu Lambda^{1/2} theta Lambda^{1/2} psi
                  - (1/eps) R1 theta psi) - int theta_0 psi(0).

    The viscous pairing enters with a minus sign inside the bracket, as
    follows from multiplying the equation by psi and integrating by parts.
    ``scale`` is the sum of the absolute values of the individual terms.
    """
    _require_regular(traj)
    psi.validate(require_zonal)
    regime = traj.regime if regime is None else regime
    grid = traj.grid
    if psi.grid != grid:
        raise ValueError("test function lives on a different grid")
    t = traj.times
    stack = traj.coeff_stack
    S = forward_transform(psi.spatial).coeffs
    a = np.asarray(psi.temporal(t), dtype=float)
    da = np.asarray(psi.temporal_dt(t), dtype=float)

    time_term = _pair(grid, stack, S) * da
    if traj.config.linear_only:
        adv = np.zeros_like(t)
    else:
        d1S, d2S = grid.deriv1 * S, grid.deriv2 * S
        adv = np.empty_like(t)
        for i, c in enumerate(stack):
            th = to_physical(grid, c)
            u1 = to_physical(grid, -grid.riesz2 * c)
            u2 = to_physical(grid, grid.riesz1 * c)
            F1 = np.fft.fft2(th * u1) * grid._phase / (grid.n1 * grid.n2)
            F2 = np.fft.fft2(th * u2) * grid._phase / (grid.n1 * grid.n2)
            if traj.config.dealias:
                F1, F2 = F1 * grid.dealias_mask, F2 * grid.dealias_mask
            adv[i] = _pair(grid, F1, d1S) + _pair(grid, F2, d2S)
        adv *= a
    visc = regime.viscosity * _pair(grid, grid.kmag * stack, S) * a
    riesz = regime.amplitude * _pair(grid, grid.riesz1 * stack, S) * a

    I = lambda y: float(np.trapezoid(y, t))  # noqa: E731
    terms = [I(time_term), I(adv), I(visc), I(riesz)]
    initial = float(_pair(grid, stack[0], S)) * psi.temporal_at(0.0)
    residual = -(terms[0] + terms[1] - terms[2] - (terms[3] if include_riesz else 0.0)) - initial
    scale = sum(abs(x) for x in terms) + abs(initial)
    return WeakFormResult(residual, scale, terms[3])


# ---------------------------------------------------------------------------
# constraint and growth


def constraint_residual(g: SpectralField) -> float:
    """||R1 g|| / ||g||; zero for the zero field."""
    den = np.sum(np.abs(g.coeffs) ** 2)
    if den == 0:
        return 0.0
    return float(math.sqrt(np.sum(np.abs(g.grid.riesz1 * g.coeffs) ** 2) / den))


def time_average(traj: Trajectory, t0: float = 0.0, t1: float | None = None) -> SpectralField:
    """(1/(t1-t0)) int_{t0}^{t1} theta dt over the samples in the window."""
    t1 = traj.times[-1] if t1 is None else t1
    sel = (traj.times >= t0 - 1e-12) & (traj.times <= t1 + 1e-12)
    t = traj.times[sel]
    if len(t) < 2:
        raise ValueError("need at least two samples in the averaging window")
    avg = np.trapezoid(traj.coeff_stack[sel], t, axis=0) / (t[-1] - t[0])
    return SpectralField(traj.grid, avg)


@dataclass(frozen=True)
class HsGrowthReport:
    """H^s history, with T* the first time int_0^t ||theta||^2 reaches ||theta_0||."""

    s: float
    times: np.ndarray
    norms: np.ndarray
    cumulative: np.ndarray
    t_star: float
    unbounded: bool
    required_C: float

    def satisfies(self, C: float) -> bool:
        """||theta(t)|| <= ||theta_0|| + C int_0^t ||theta||^2 at every sample."""
        bound = self.norms[0] + C * self.cumulative
        return bool(np.all(self.norms <= bound * (1 + 1e-12) + 1e-300))


def hs_growth(traj: Trajectory, s: float | None = None, fam: DyadicFamily | None = None) -> HsGrowthReport:
    """H^s norm per sample (Littlewood-Paley form) and the T* estimate."""
    _require_regular(traj)
    s = traj.config.hs_order if s is None else s
    fam = DyadicFamily(traj.grid) if fam is None else fam
    t = traj.times
    norms = np.array([lp_sobolev_norm(g, s, fam) for g in traj.snapshots])
    cum = _cumtrapz(norms**2, t)
    thr = norms[0]
    over = np.nonzero(cum > thr)[0]
    if norms[0] == 0 or over.size == 0:
        t_star, unbounded = float(t[-1]), True
    else:
        i = over[0]
        frac = (thr - cum[i - 1]) / (cum[i] - cum[i - 1])
        t_star, unbounded = float(t[i - 1] + frac * (t[i] - t[i - 1])), False
    pos = cum > 0
    required = float(np.max((norms[pos] - norms[0]) / cum[pos], initial=0.0))
    return HsGrowthReport(s, t, norms, cum, t_star, unbounded, max(required, 0.0))


# ---------------------------------------------------------------------------
# eps sweeps


def limit_evolution(regime) -> Callable[[ZonalProfile, float], ZonalProfile]:
    """The limit model matching a scaling regime."""
    if isinstance(regime, FixedViscosity):
        return lambda p, t: evolve_fast_rotation_limit(p, regime.nu, t)
    if isinstance(regime, Combined):
        return evolve_combined_limit
    raise TypeError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class ConvergenceReport:
    epsilons: np.ndarray
    deviations: np.ndarray
    T: float
    K_fraction: float
    norm_id: str = "L2([0,T]xK)"
    constraint_residuals: np.ndarray = field(default_factory=lambda: np.array([]))
    floor: float = D_FLOOR

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.deviations) < 0))

    @property
    def below_floor(self) -> bool:
        return bool(np.all(self.deviations < self.floor))

    @property
    def passed(self) -> bool:
        return self.strictly_decreasing or self.below_floor

    def rows(self) -> list[tuple]:
        return [(float(e), float(d), self.norm_id, self.T, self.K_fraction) for e, d in zip(self.epsilons, self.deviations)]


def _mean_deviation(traj: Trajectory, limit, T: float, K_fraction: float) -> float:
    grid = traj.grid
    sel = traj.times <= T + 1e-12
    t = traj.times[sel]
    p0 = project_to_zonal(traj.snapshots[0])
    K = grid.strip_mask(K_fraction)
    sq = np.empty(len(t))
    for i, ti in enumerate(t):
        diff = traj.snapshots[np.flatnonzero(sel)[i]].coeffs[:, 0] - limit(p0, float(ti)).coeffs
        vals = ZonalProfile(grid, diff).values()
        # the zonal difference is constant in x1, so the K-integral is L1 * int_K dx2
        sq[i] = grid.L1 * float(np.sum(vals[K] ** 2)) * (2 * grid.L2 / grid.n2)
    return math.sqrt(max(float(np.trapezoid(sq, t)), 0.0))


def convergence_metric(
    sweep: Sequence[Trajectory],
    limit: Callable[[ZonalProfile, float], ZonalProfile] | None = None,
    T: float | None = None,
    K_fraction: float = 0.5,
) -> ConvergenceReport:
    """D(eps) = || <theta_eps> - bar theta ||_{L^2([0,T] x K)}, K the centred sub-strip.

    The limit solution starts from the horizontal mean of each member's
    initial datum and is evolved by ``limit`` (default: the model matching
    each member's regime).
    """
    if not sweep:
        raise ValueError("empty sweep")
    grid = sweep[0].grid
    horizon = sweep[0].times[-1]
    for tr in sweep:
        _require_regular(tr)
        if tr.grid != grid:
            raise ValueError("sweep members must share a grid")
        if abs(tr.times[-1] - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError("sweep members must share a horizon")
    T = horizon if T is None else T
    eps = np.array([tr.regime.epsilon for tr in sweep])
    dev = np.array([_mean_deviation(tr, limit or limit_evolution(tr.regime), T, K_fraction) for tr in sweep])
    cres = np.array([constraint_residual(time_average(tr, 0.0, T)) for tr in sweep])
    return ConvergenceReport(eps, dev, float(T), K_fraction, constraint_residuals=cres)
