"""Property suites behind ``sqglimit verify``.

Every check is seeded, so the printed table is byte-identical across runs on
one platform.  Each row reports the measured value against its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagnostics import energy_ledger, mean_equation_residual, riesz_orthogonality
from .limits import evolve_fast_rotation_limit, project_to_zonal
from .littlewood_paley import DyadicFamily, bernstein_check, commutator_check, norm_equivalence_constants
from .solver import FixedViscosity, IllPreparedFamily, SolverConfig, integrate, linear_symbol, make_ill_prepared_data
from .spectral import (
    GridSpec,
    SpectralField,
    forward_transform,
    fractional_laplacian,
    inverse_transform,
    random_field,
    resample,
    riesz,
    derivative,
    spectral_divergence,
    velocity_from_theta,
)

SEED = 20240613


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{self.suite:<7} {self.name:<40} {self.value:>11.3e} {self.tolerance:>11.3e}  {flag}"


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a))


def _le(suite, name, value, tol) -> Check:
    return Check(suite, name, float(value), float(tol), bool(value <= tol))


def core_checks() -> list[Check]:
    rng = np.random.default_rng(SEED)
    out = []
    worst = dict.fromkeys(["roundtrip", "riesz", "half", "div"], 0.0)
    for grid in (GridSpec(64, 128), GridSpec(128, 256)):
        for _ in range(10):
            g = random_field(grid, rng, mean_free=True)
            worst["roundtrip"] = max(worst["roundtrip"], _rel(forward_transform(inverse_transform(g)).coeffs, g.coeffs))
            for axis in (1, 2):
                a = riesz(g, axis).coeffs
                b = derivative(fractional_laplacian(g, -1.0), axis).coeffs
                worst["riesz"] = max(worst["riesz"], _rel(a, b))
            h = fractional_laplacian(fractional_laplacian(g, 0.5), 0.5).coeffs
            worst["half"] = max(worst["half"], _rel(h, fractional_laplacian(g, 1.0).coeffs))
            u1, u2 = velocity_from_theta(g)
            worst["div"] = max(worst["div"], spectral_divergence(u1, u2).norm() / g.norm())
    out.append(_le("core", "transform roundtrip", worst["roundtrip"], 1e-12))
    out.append(_le("core", "R_i = d_i Lambda^-1", worst["riesz"], 1e-12))
    out.append(_le("core", "Lambda^1/2 Lambda^1/2 = Lambda", worst["half"], 1e-12))
    out.append(_le("core", "div u = 0", worst["div"], 1e-12))
    grid = GridSpec(64, 128)
    for s in (0.0, 0.5, 1.0):
        ratio = 0.0
        for _ in range(20):
            g = random_field(grid, rng)
            ratio = max(ratio, abs(riesz_orthogonality(g, s)) / fractional_laplacian(g, s).norm() ** 2)
        out.append(_le("core", f"Riesz orthogonality s={s:g}", ratio, 1e-13))
    return out


def lp_checks() -> list[Check]:
    out = []
    for n in (32, 64, 128):
        fam = DyadicFamily(GridSpec(n, n, L2=np.pi))
        total = sum(fam.block_mask(j) for j in fam.indices)
        out.append(_le("lp", f"partition of unity {n}x{n}", np.max(np.abs(total - 1)), 1e-12))
    master = GridSpec(128, 128, L2=np.pi)
    rng = np.random.default_rng(SEED)
    fields = [random_field(master, rng, decay=4.0) for _ in range(20)]
    for s in (0.5, 1.0, 2.0):
        consts = []
        for n in (32, 64, 128):
            grid = GridSpec(n, n, L2=np.pi)
            consts.append(norm_equivalence_constants([resample(f, grid) for f in fields], s, DyadicFamily(grid)))
        c = np.array(consts)
        spread = max(np.ptp(c[:, 0]) / c[:, 0].mean(), np.ptp(c[:, 1]) / c[:, 1].mean())
        out.append(_le("lp", f"B^s_22 ~ H^s constants s={s:g}", spread, 0.10))
    grid = GridSpec(128, 128, L2=np.pi)
    for p, q in ((2, 2), (2, math.inf), (1, 2)):
        chk = bernstein_check(grid, p, q, trials=30, seed=SEED % 1000)
        worst = max(r.ratio_max for r in chk.holdout) / chk.fitted_C
        out.append(Check("lp", f"Bernstein holdout p={p:g} q={q:g}", worst, chk.headroom, chk.passed))
    fam = DyadicFamily(GridSpec(64, 64, L2=np.pi))
    states = [random_field(fam.grid, rng, decay=3.5) for _ in range(20)]
    chk = commutator_check(states, 2.5, fam, n_calibration=10)
    worst = max(p.C for p in chk.holdout) / chk.fitted_C
    out.append(Check("lp", "commutator l2 constant holdout", worst, chk.headroom, chk.passed))
    return out


def solver_checks() -> list[Check]:
    out = []
    rng = np.random.default_rng(SEED)
    grid = GridSpec(32, 64)
    theta = random_field(grid, rng)
    for eps in (1.0, 0.01):
        regime = FixedViscosity(eps, 0.5)
        tr = integrate(theta, regime, SolverConfig(dt_max=0.01, t_end=1.0, linear_only=True, sample_every=100))
        want = np.exp(-linear_symbol(grid, regime)) * theta.coeffs
        err = np.max(np.abs(tr.snapshots[-1].coeffs - want)) / np.max(np.abs(want))
        out.append(_le("solver", f"linear closed form eps={eps:g}", err, 1e-10))
    zgrid = GridSpec(16, 256)
    z0 = make_ill_prepared_data(IllPreparedFamily(amp=0.0), 0.05, zgrid)
    tr = integrate(z0, FixedViscosity(0.05, 0.5), SolverConfig(dt_max=0.05, t_end=1.0))
    want = evolve_fast_rotation_limit(project_to_zonal(z0), 0.5, 1.0).coeffs
    err = np.linalg.norm(project_to_zonal(tr.snapshots[-1]).coeffs - want) / np.linalg.norm(want)
    out.append(_le("solver", "zonal run = fractional heat flow", err, 1e-8))
    rgrid = GridSpec(64, 256)
    r0 = make_ill_prepared_data(IllPreparedFamily(), 0.2, rgrid)
    ref = integrate(r0, FixedViscosity(0.2, 0.5), SolverConfig(dt_max=0.01, t_end=0.5))
    led = energy_ledger(ref)
    worst = float(np.max(led.defects / np.maximum(led.tolerances, 1e-300)))
    out.append(Check("solver", "energy ledger defect / tolerance", worst, 1.0, led.passed))
    mr = mean_equation_residual(ref)
    out.append(_le("solver", "mean of R1 theta", mr.riesz_mean_max, 0.0))
    out.append(_le("solver", "boundary mass fraction", float(np.max(ref.diagnostics["boundary_mass"])), 1e-6))
    return out


SUITES: dict[str, Callable[[], list[Check]]] = {
    "core": core_checks,
    "lp": lp_checks,
    "solver": solver_checks,
}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()


def format_table(checks: list[Check]) -> str:
    head = f"{'suite':<7} {'check':<40} {'value':>11} {'tolerance':>11}  result"
    lines = [head, "-" * len(head)] + [c.line() for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)


__all__ = ["Check", "SUITES", "run_suite", "format_table"]
