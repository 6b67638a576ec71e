"""Integrating-factor Runge-Kutta solver for rotating dissipative SQG.

Solves

    d/dt theta + div(theta u) + nu Lambda theta + (1/eps) R1 theta = 0,
    u = R^perp theta = (-R2 theta, R1 theta),

on the strip grid.  The linear operator is diagonal in Fourier space with
symbol nu |xi| + (i/eps) xi1/|xi| and is integrated exactly; the transport
term is explicit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .spectral import GridSpec, PhysicalField, SpectralField, forward_transform, to_physical, to_spectral

__all__ = [
    "RegularityLossError",
    "FixedViscosity",
    "Combined",
    "ScalingRegime",
    "SolverConfig",
    "Trajectory",
    "IllPreparedFamily",
    "linear_symbol",
    "nonlinear_term",
    "step",
    "integrate",
    "make_ill_prepared_data",
    "energy_tolerance",
    "boundary_mass_fraction",
]

logger = logging.getLogger(__name__)

DT_MIN = 1e-12
BOUNDARY_FRACTION = 0.1
BOUNDARY_MASS_LIMIT = 1e-6
DATA_DECAY_LIMIT = 1e-8


class RegularityLossError(RuntimeError):
    """The discrete solution produced non-finite values."""


@dataclass(frozen=True)
class FixedViscosity:
    epsilon: float
    nu: float

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    @property
    def viscosity(self) -> float:
        return self.nu

    @property
    def amplitude(self) -> float:
        return 1.0 / self.epsilon


@dataclass(frozen=True)
class Combined:
    """Fast rotation with vanishing viscosity nu = eps^alpha."""

    epsilon: float
    alpha: float

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def viscosity(self) -> float:
        return self.epsilon**self.alpha

    @property
    def amplitude(self) -> float:
        return 1.0 / self.epsilon


ScalingRegime = Union[FixedViscosity, Combined]


def _check_epsilon(eps):
    if not 0 < eps <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {eps}")


@dataclass(frozen=True)
class SolverConfig:
    dt_max: float
    t_end: float
    cfl: float = 0.5
    eps_dt_factor: float | None = 1.0
    dealias: bool = True
    sample_every: int = 1
    integrator: str = "IFRK2"
    linear_only: bool = False
    hs_order: float = 2.5
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.dt_max > 0 and self.t_end >= 0 and self.cfl > 0):
            raise ValueError("dt_max and cfl must be positive, t_end non-negative")
        if self.eps_dt_factor is not None and not self.eps_dt_factor > 0:
            raise ValueError("eps_dt_factor must be positive or None")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")
        if self.integrator not in ("IFRK2", "IFRK4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))

    def refined(self, factor: float = 2.0) -> SolverConfig:
        """Same run with every time-step cap divided by ``factor``."""
        from dataclasses import replace

        return replace(
            self,
            dt_max=self.dt_max / factor,
            cfl=self.cfl / factor,
            eps_dt_factor=None if self.eps_dt_factor is None else self.eps_dt_factor / factor,
            sample_every=self.sample_every,
        )


def linear_symbol(grid: GridSpec, regime: ScalingRegime) -> np.ndarray:
    """lambda(xi) = nu |xi| + (i/eps) xi1/|xi|, zero at xi = 0."""
    return regime.viscosity * grid.kmag + regime.amplitude * grid.riesz1


def _flux_divergence(grid: GridSpec, c: np.ndarray, dealias: bool = True) -> tuple[np.ndarray, float]:
    # u1 + i u2 comes out of a single inverse transform because both are real
    u = np.fft.ifft2((grid.riesz1 * 1j - grid.riesz2) * c * grid._phase) * (grid.n1 * grid.n2)
    theta = to_physical(grid, c)
    flux = to_spectral(grid, theta * u.real) * grid.deriv1 + to_spectral(grid, theta * u.imag) * grid.deriv2
    if dealias:
        flux *= grid.dealias_mask
    if not np.all(np.isfinite(flux)):
        raise RegularityLossError("solution lost regularity")
    return flux, float(np.sqrt(np.max(u.real**2 + u.imag**2)))


def nonlinear_term(theta: SpectralField, dealias: bool = True) -> SpectralField:
    """div(theta u) with u = R^perp theta, pseudo-spectral and dealiased."""
    return SpectralField(theta.grid, _flux_divergence(theta.grid, theta.coeffs, dealias)[0])


class _Stepper:
    def __init__(self, grid: GridSpec, regime: ScalingRegime, config: SolverConfig):
        self.grid = grid
        self.regime = regime
        self.config = config
        self.symbol = linear_symbol(grid, regime)
        self._exp_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def rhs(self, c: np.ndarray) -> tuple[np.ndarray, float]:
        if self.config.linear_only:
            return np.zeros_like(c), 0.0
        # overflow is reported through the finiteness check, not numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            return _flux_divergence(self.grid, c, self.config.dealias)

    def exponentials(self, dt: float):
        if dt not in self._exp_cache:
            if len(self._exp_cache) > 8:
                self._exp_cache.clear()
            self._exp_cache[dt] = (np.exp(-dt * self.symbol), np.exp(-0.5 * dt * self.symbol))
        return self._exp_cache[dt]

    def advance(self, c: np.ndarray, dt: float, n0: np.ndarray | None = None) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return self._advance(c, dt, n0)

    def _advance(self, c: np.ndarray, dt: float, n0: np.ndarray | None) -> np.ndarray:
        if n0 is None:
            n0 = self.rhs(c)[0]
        e, e2 = self.exponentials(dt)
        if self.config.integrator == "IFRK2":
            c1 = e * (c - dt * n0)
            n1 = self.rhs(c1)[0]
            return e * (c - 0.5 * dt * n0) - 0.5 * dt * n1
        k1 = -n0
        k2 = -self.rhs(e2 * (c + 0.5 * dt * k1))[0]
        k3 = -self.rhs(e2 * c + 0.5 * dt * k2)[0]
        k4 = -self.rhs(e * c + dt * e2 * k3)[0]
        return e * c + dt / 6 * (e * k1 + 2 * e2 * (k2 + k3) + k4)

    def choose_dt(self, umax: float) -> float:
        cfg = self.config
        dt = cfg.dt_max
        if not cfg.linear_only:
            if umax > 0:
                dt = min(dt, cfg.cfl * self.grid.dx / umax)
            if cfg.eps_dt_factor is not None:
                dt = min(dt, cfg.eps_dt_factor * self.regime.epsilon)
        return dt


def step(theta: SpectralField, dt: float, regime: ScalingRegime, config: SolverConfig) -> SpectralField:
    """Advance one integrating-factor RK step of size ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    stepper = _Stepper(theta.grid, regime, config)
    out = stepper.advance(theta.coeffs, dt)
    if not np.all(np.isfinite(out)):
        raise RegularityLossError("solution lost regularity")
    return SpectralField(theta.grid, out)


def energy_tolerance(dt: float, t: float) -> float:
    """Admissible energy-inequality defect after time ``t`` at step ``dt``."""
    return 10.0 * dt**2 * t


def boundary_mass_fraction(theta: SpectralField, fraction: float = BOUNDARY_FRACTION) -> float:
    """Share of the L^2 mass in the outer ``fraction`` of the vertical strip."""
    values = to_physical(theta.grid, theta.coeffs)
    outer = theta.grid.strip_mask(1 - fraction, outer=True)
    total = float(np.sum(values**2))
    return float(np.sum(values[outer] ** 2)) / total if total > 0 else 0.0


@dataclass
class Trajectory:
    """Sampled solution plus the per-sample diagnostic ledger.

    ``diagnostics`` holds arrays aligned with ``times``: ``l2``, ``h_half``
    (the homogeneous H^{1/2} seminorm), ``hs``, ``dissipation`` (running
    2 nu int ||Lambda^{1/2} theta||^2, trapezoid over every step),
    ``energy_defect`` and ``boundary_mass``.
    """

    times: np.ndarray
    snapshots: list[SpectralField]
    diagnostics: dict[str, np.ndarray]
    regime: ScalingRegime
    config: SolverConfig
    regular: bool = True
    status: str = "ok"
    dt_used: float = 0.0
    n_steps: int = 0

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    @property
    def boundary_ok(self) -> bool:
        return bool(np.max(self.diagnostics["boundary_mass"]) < BOUNDARY_MASS_LIMIT)

    @property
    def valid(self) -> bool:
        return self.regular and self.boundary_ok

    @cached_property
    def coeff_stack(self) -> np.ndarray:
        return np.stack([s.coeffs for s in self.snapshots])


def _seminorm_half_sq(grid: GridSpec, c: np.ndarray) -> float:
    return float(grid.area * np.sum(grid.kmag * np.abs(c) ** 2))


@np.errstate(over="ignore", invalid="ignore")
def integrate(theta0: SpectralField, regime: ScalingRegime, config: SolverConfig) -> Trajectory:
    """Advance ``theta0`` to ``config.t_end``.

    Loss of regularity or time-step underflow stops the run and returns the
    partial trajectory with ``regular=False``.
    """
    grid = theta0.grid
    stepper = _Stepper(grid, regime, config)
    nu = regime.viscosity
    s = config.hs_order
    hs_weight = (1 + grid.kmag**2) ** s
    outer = grid.strip_mask(1 - BOUNDARY_FRACTION, outer=True)

    times: list[float] = []
    snaps: list[SpectralField] = []
    rows: list[tuple] = []
    e0 = grid.area * float(np.sum(np.abs(theta0.coeffs) ** 2))

    def record(t, c, dissipation):
        values = to_physical(grid, c)
        l2sq = grid.area * float(np.sum(np.abs(c) ** 2))
        total = float(np.sum(values**2))
        bmass = float(np.sum(values[outer] ** 2)) / total if total > 0 else 0.0
        times.append(t)
        snaps.append(SpectralField(grid, c))
        rows.append(
            (
                math.sqrt(l2sq),
                math.sqrt(_seminorm_half_sq(grid, c)),
                math.sqrt(grid.area * float(np.sum(hs_weight * np.abs(c) ** 2))),
                dissipation,
                l2sq + dissipation - e0,
                bmass,
            )
        )

    c = theta0.coeffs.copy()
    t = 0.0
    n = 0
    dissipation = 0.0
    rate = 2 * nu * _seminorm_half_sq(grid, c)
    stops = [ts for ts in config.snapshot_times if 0 < ts < config.t_end] + [config.t_end]
    stop_idx = 0
    regular, status, dt_used = True, "ok", 0.0
    record(t, c, dissipation)
    while stop_idx < len(stops):
        target = stops[stop_idx]
        try:
            n0, umax = stepper.rhs(c)
            dt = stepper.choose_dt(umax)
            if dt < DT_MIN:
                raise RegularityLossError(f"time step underflow (dt={dt:.3e}) at t={t:.6g}")
            landing = t + dt >= target - 1e-9 * max(1.0, target)
            if landing:
                dt = target - t
            c_new = stepper.advance(c, dt, n0)
            if not np.all(np.isfinite(c_new)):
                raise RegularityLossError("solution lost regularity")
        except RegularityLossError as exc:
            regular = False
            msg = str(exc)
            status = msg if " at t=" in msg else f"{msg} at t={t:.6g}"
            logger.warning(status)
            break
        c = c_new
        n += 1
        dt_used = max(dt_used, dt)
        t = target if landing else t + dt
        new_rate = 2 * nu * _seminorm_half_sq(grid, c)
        dissipation += 0.5 * dt * (rate + new_rate)
        rate = new_rate
        if landing:
            stop_idx += 1
        if landing or n % config.sample_every == 0:
            record(t, c, dissipation)

    cols = np.array(rows, dtype=float).reshape(-1, 6)
    diagnostics = {
        name: cols[:, i]
        for i, name in enumerate(("l2", "h_half", "hs", "dissipation", "energy_defect", "boundary_mass"))
    }
    return Trajectory(
        np.array(times), snaps, diagnostics, regime, config, regular, status, dt_used, n
    )


_PROFILES = ("hat", "gaussian", "zero")


@dataclass(frozen=True)
class IllPreparedFamily:
    """Initial data theta_0 = bartheta0(x2) + amp * oscillation(x1, x2).

    The zonal profile ``bartheta0`` is a Mexican hat (zero integral, so the
    fractional heat flow keeps it localised), a Gaussian, or zero.  The
    oscillation is a seeded sum of ``n_modes`` horizontal harmonics with
    Gaussian envelopes in x2; it has zero horizontal mean.  With
    ``eps_power > 0`` the oscillation amplitude becomes ``amp * eps**eps_power``.
    """

    amp: float = 1.0
    seed: int = 0
    profile: str = "hat"
    width: float = 2.0
    n_modes: int = 3
    eps_power: float = 0.0

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected one of {_PROFILES}")

    @cached_property
    def _modes(self) -> list[tuple[int, float, float, float, float]]:
        rng = np.random.default_rng(self.seed)
        modes = []
        for m in range(1, self.n_modes + 1):
            a, ph, c, s = rng.uniform([0.5, 0, -2, 1], [1.0, 2 * np.pi, 2, 2])
            modes.append((m, a / m, ph, c, s))
        return modes

    def bartheta0(self, x2):
        x2 = np.asarray(x2, dtype=float)
        w = self.width
        if self.profile == "hat":
            return (1 - x2**2 / w**2) * np.exp(-(x2**2) / (2 * w**2))
        if self.profile == "gaussian":
            return np.exp(-(x2**2) / (2 * w**2))
        return np.zeros_like(x2)

    def oscillation(self, x1, x2, L1: float = 2 * np.pi):
        total = 0.0
        for m, a, ph, c, s in self._modes:
            total = total + a * np.cos(2 * np.pi * m * x1 / L1 + ph) * np.exp(-((x2 - c) ** 2) / (2 * s**2))
        return total

    def amplitude(self, epsilon: float) -> float:
        if self.eps_power == 0:
            return self.amp
        return self.amp * epsilon**self.eps_power

    @cached_property
    def l2_bound(self) -> float:
        """Uniform-in-eps bound on ||theta_0||_{L^2} (triangle inequality, eps <= 1)."""
        ref = GridSpec(64, 1024)
        zonal = self.bartheta0(ref.x2) * np.ones(ref.shape)
        osc = self.oscillation(ref.x1, ref.x2, ref.L1)
        norm = lambda v: math.sqrt(float(np.sum(v**2)) * ref.cell_area)  # noqa: E731
        return norm(zonal) + abs(self.amp) * norm(osc)

    def describe(self) -> dict:
        return {
            "profile": self.profile,
            "amp": self.amp,
            "seed": self.seed,
            "width": self.width,
            "n_modes": self.n_modes,
            "eps_power": self.eps_power,
        }


def make_ill_prepared_data(family: IllPreparedFamily, epsilon: float, grid: GridSpec) -> SpectralField:
    """Render the family member for ``epsilon`` on ``grid``."""
    _check_epsilon(epsilon)
    zonal = forward_transform(
        PhysicalField(grid, family.bartheta0(grid.x2) * np.ones(grid.shape))
    ).coeffs
    zonal[:, 1:] = 0
    osc = forward_transform(PhysicalField.from_function(grid, lambda x1, x2: family.oscillation(x1, x2, grid.L1)))
    osc_c = osc.coeffs
    osc_c[:, 0] = 0
    coeffs = zonal + family.amplitude(epsilon) * osc_c
    values = to_physical(grid, coeffs)
    outer = grid.strip_mask(1 - BOUNDARY_FRACTION, outer=True)
    if values[outer].size and np.max(np.abs(values[outer])) > DATA_DECAY_LIMIT:
        raise ValueError("insufficient decay near vertical boundary")
    return SpectralField(grid, coeffs)
