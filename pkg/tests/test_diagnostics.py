import math

import numpy as np
import pytest

from sqglimit.diagnostics import (
    InvalidTrajectoryError,
    TestFunction,
    constraint_residual,
    convergence_metric,
    energy_ledger,
    hs_growth,
    mean_equation_residual,
    riesz_orthogonality,
    time_average,
    weak_form_residual,
)
from sqglimit.limits import evolve_combined_limit
from sqglimit.solver import (
    Combined,
    FixedViscosity,
    IllPreparedFamily,
    SolverConfig,
    integrate,
    make_ill_prepared_data,
)
from sqglimit.spectral import (
    GridSpec,
    PhysicalField,
    SpectralField,
    forward_transform,
    fractional_laplacian,
    horizontal_mean,
    random_field,
)

ZONAL = IllPreparedFamily(amp=0.0)


def linear_zonal_run(dt):
    grid = GridSpec(8, 128)
    theta0 = make_ill_prepared_data(ZONAL, 0.1, grid)
    cfg = SolverConfig(dt_max=dt, t_end=0.5, linear_only=True)
    return integrate(theta0, FixedViscosity(0.1, 0.5), cfg)


@pytest.fixture(scope="module")
def zonal_run():
    return linear_zonal_run(1e-3)


@pytest.fixture(scope="module")
def nonlinear_runs():
    """The same short nonlinear run sampled every 4, 2 and 1 steps."""
    grid = GridSpec(32, 128)
    theta0 = make_ill_prepared_data(IllPreparedFamily(), 0.2, grid)
    out = []
    for every in (4, 2, 1):
        cfg = SolverConfig(dt_max=0.01, t_end=0.4, cfl=10, eps_dt_factor=None, integrator="IFRK4", sample_every=every)
        out.append(integrate(theta0, FixedViscosity(0.2, 0.5), cfg))
    return out


def zero_run(grid, t_end=0.2):
    return integrate(SpectralField.zeros(grid), FixedViscosity(0.5, 0.5), SolverConfig(dt_max=0.05, t_end=t_end))


def broken_run():
    grid = GridSpec(16, 16, L2=np.pi)
    tr = integrate(random_field(grid, np.random.default_rng(0)), FixedViscosity(1.0, 1.0), SolverConfig(dt_max=1.0, t_end=1.0, cfl=1e-20))
    assert not tr.regular
    return tr


class TestEnergyLedger:
    def test_zero_trajectory(self):
        led = energy_ledger(zero_run(GridSpec(8, 16)))
        assert np.all(led.defects == 0) and led.passed

    def test_zonal_linear_run_balances(self):
        # the only error left is the trapezoid rule for the dissipation integral
        led = energy_ledger(linear_zonal_run(1.25e-4))
        assert np.max(np.abs(led.defects)) <= 1e-8

    def test_zonal_defect_is_second_order(self, zonal_run):
        coarse = np.max(np.abs(energy_ledger(linear_zonal_run(2e-3)).defects))
        fine = np.max(np.abs(energy_ledger(zonal_run).defects))
        assert coarse / fine == pytest.approx(4, rel=0.05)

    def test_nonlinear_run_within_tolerance(self, nonlinear_runs):
        led = energy_ledger(nonlinear_runs[-1])
        assert led.passed
        assert led.rows()[0] == (0.0, 0.0)

    def test_invalid_trajectory(self):
        with pytest.raises(InvalidTrajectoryError):
            energy_ledger(broken_run())


class TestRieszOrthogonality:
    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
    def test_random_fields(self, s):
        grid = GridSpec(32, 64)
        rng = np.random.default_rng(1)
        for _ in range(100):
            g = random_field(grid, rng)
            ref = fractional_laplacian(g, s).norm() ** 2
            assert abs(riesz_orthogonality(g, s)) <= 1e-13 * ref

    def test_zonal_field_exact(self):
        g = horizontal_mean(random_field(GridSpec(16, 32), np.random.default_rng(2)))
        assert riesz_orthogonality(g, 0.5) == 0.0

    def test_not_trivially_zero_for_other_pairings(self):
        # the same quadrature detects a non-orthogonal pairing
        grid = GridSpec(16, 16, L2=np.pi)
        g = forward_transform(PhysicalField.from_function(grid, lambda x1, x2: np.sin(x1) + np.cos(x1)))
        r1 = np.real(np.fft.ifft2(grid.riesz1 * g.coeffs * grid._phase)) * grid.n1 * grid.n2
        assert abs(np.sum(r1 * np.sin(grid.x1)) * grid.cell_area) > 1


class TestMeanEquation:
    def test_zonal_heat_balance(self, zonal_run):
        res = mean_equation_residual(zonal_run)
        assert res.max_norm <= 1e-6
        assert res.riesz_mean_zero

    def test_second_order_in_sample_spacing(self, nonlinear_runs):
        norms = [mean_equation_residual(tr).max_norm for tr in nonlinear_runs]
        assert norms[0] / norms[1] == pytest.approx(4, rel=0.15)
        assert norms[1] / norms[2] == pytest.approx(4, rel=0.15)
        assert all(mean_equation_residual(tr).riesz_mean_zero for tr in nonlinear_runs)

    def test_needs_three_samples(self):
        grid = GridSpec(8, 16)
        tr = integrate(SpectralField.zeros(grid), FixedViscosity(0.5, 0.5), SolverConfig(dt_max=1.0, t_end=0.5))
        with pytest.raises(ValueError, match="3 samples"):
            mean_equation_residual(tr)

    def test_wrong_viscosity_detected(self, zonal_run):
        assert mean_equation_residual(zonal_run, nu=0.6).max_norm > 1e-3


class TestTestFunction:
    def test_zonal_bump_is_valid(self):
        psi = TestFunction.zonal_bump(GridSpec(16, 128), 1.0)
        psi.validate()
        assert psi.x1_residual() == 0.0 and psi.outer_max() == 0.0
        assert psi.temporal_at(1.0) == 0.0
        assert psi.temporal_at(0.0) == 1.0

    def test_temporal_derivative_consistent(self):
        psi = TestFunction.zonal_bump(GridSpec(8, 16), 2.0)
        t = np.linspace(0.1, 1.9, 7)
        h = 1e-6
        fd = (psi.temporal(t + h) - psi.temporal(t - h)) / (2 * h)
        assert np.allclose(fd, psi.temporal_dt(t), atol=1e-8)

    def test_harmonic_is_not_zonal(self):
        psi = TestFunction.zonal_bump(GridSpec(16, 128), 1.0, harmonic=1)
        assert not psi.zonal
        with pytest.raises(ValueError, match="depends on x1"):
            psi.validate()
        psi.validate(require_zonal=False)

    def test_support_too_wide(self):
        with pytest.raises(ValueError):
            TestFunction.zonal_bump(GridSpec(8, 64), 1.0, width=30.0)


class TestWeakForm:
    def test_zero_trajectory(self):
        grid = GridSpec(8, 64)
        wf = weak_form_residual(zero_run(grid), TestFunction.zonal_bump(grid, 0.2))
        assert wf.residual == 0.0

    def test_zonal_linear_run(self):
        tr = linear_zonal_run(5e-4)
        psi = TestFunction.zonal_bump(tr.grid, 0.5, width=6.0)
        wf = weak_form_residual(tr, psi)
        assert abs(wf.residual) <= 1e-6 * wf.scale

    def test_zonal_linear_run_second_order(self, zonal_run):
        psi = TestFunction.zonal_bump(zonal_run.grid, 0.5, width=6.0)
        coarse = weak_form_residual(linear_zonal_run(2e-3), psi).residual
        fine = weak_form_residual(zonal_run, psi).residual
        assert coarse / fine == pytest.approx(4, rel=0.05)

    def test_riesz_term_vanishes_for_zonal_test_functions(self, nonlinear_runs):
        tr = nonlinear_runs[-1]
        psi = TestFunction.zonal_bump(tr.grid, 0.4, width=6.0)
        a = weak_form_residual(tr, psi, include_riesz=True)
        b = weak_form_residual(tr, psi, include_riesz=False)
        assert a.riesz_term == 0.0
        assert abs(a.residual - b.residual) <= 1e-13 * a.scale

    def test_quadrature_order(self, nonlinear_runs):
        psi = TestFunction.zonal_bump(nonlinear_runs[0].grid, 0.4, width=6.0)
        res = [abs(weak_form_residual(tr, psi).residual) for tr in nonlinear_runs]
        assert res[0] / res[1] == pytest.approx(4, rel=0.2)
        assert res[1] / res[2] == pytest.approx(4, rel=0.2)

    def test_generic_test_function_sees_rotation(self, nonlinear_runs):
        # dropping the x1 constraint, the Riesz pairing is active and still balances
        tr = nonlinear_runs[-1]
        psi = TestFunction.zonal_bump(tr.grid, 0.4, width=6.0, harmonic=1)
        wf = weak_form_residual(tr, psi, require_zonal=False)
        assert abs(wf.riesz_term) > 0.1 * wf.scale
        coarse = weak_form_residual(nonlinear_runs[1], psi, require_zonal=False)
        assert coarse.residual / wf.residual == pytest.approx(4, rel=0.2)
        bad = weak_form_residual(tr, psi, require_zonal=False, include_riesz=False)
        assert abs(bad.residual) > 100 * abs(wf.residual)

    def test_viscous_sign(self, zonal_run):
        # flipping the viscosity sign in the regime breaks the balance
        psi = TestFunction.zonal_bump(zonal_run.grid, 0.5, width=6.0)
        good = weak_form_residual(zonal_run, psi)
        bad = weak_form_residual(zonal_run, psi, regime=FixedViscosity(0.1, 1.0))
        assert abs(bad.residual) > 1e3 * abs(good.residual)


class TestConstraintResidual:
    def test_zonal(self):
        g = horizontal_mean(random_field(GridSpec(16, 32), np.random.default_rng(3)))
        assert constraint_residual(g) == 0.0

    def test_pure_oscillation(self):
        grid = GridSpec(16, 16, L2=np.pi)
        g = forward_transform(PhysicalField.from_function(grid, lambda x1, x2: np.cos(x1)))
        assert constraint_residual(g) == pytest.approx(1.0, abs=1e-14)

    def test_zero_field(self):
        assert constraint_residual(SpectralField.zeros(GridSpec(8, 8))) == 0.0

    def test_horizontal_mean_always_exact(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            assert constraint_residual(horizontal_mean(random_field(GridSpec(16, 32), rng))) == 0.0

    def test_time_average_of_constant_run(self):
        grid = GridSpec(8, 16)
        tr = zero_run(grid)
        assert np.all(time_average(tr).coeffs == 0)


class TestHsGrowth:
    def test_zero_data_unbounded(self):
        rep = hs_growth(zero_run(GridSpec(8, 16), t_end=0.3))
        assert rep.unbounded and rep.t_star == pytest.approx(0.3)

    def test_zonal_decay_needs_no_constant(self, zonal_run):
        rep = hs_growth(zonal_run, 2.5)
        assert np.all(np.diff(rep.norms) <= 0)
        assert rep.required_C == 0.0 and rep.satisfies(0.0)

    def test_t_star_interpolation(self, nonlinear_runs):
        rep = hs_growth(nonlinear_runs[-1])
        if not rep.unbounded:
            i = np.searchsorted(rep.times, rep.t_star)
            assert rep.cumulative[i - 1] <= rep.norms[0] <= rep.cumulative[i]
        # short-time consistency: T* ~ ||theta_0|| / ||theta_0||^2
        assert rep.t_star <= 0.4

    def test_growth_bound_with_fitted_constant(self, nonlinear_runs):
        rep = hs_growth(nonlinear_runs[-1])
        assert rep.satisfies(rep.required_C)
        assert rep.satisfies(1.5 * rep.required_C)

    def test_invalid_trajectory(self):
        with pytest.raises(InvalidTrajectoryError):
            hs_growth(broken_run())


class TestConvergenceMetric:
    def test_well_prepared_sweep(self):
        grid = GridSpec(8, 128)
        theta0 = make_ill_prepared_data(ZONAL, 0.1, grid)
        cfg = SolverConfig(dt_max=0.02, t_end=0.5)
        sweep = [integrate(theta0, FixedViscosity(e, 0.5), cfg) for e in (0.2, 0.1, 0.05)]
        rep = convergence_metric(sweep)
        assert np.all(rep.deviations <= 1e-6)
        assert rep.below_floor and rep.passed
        assert rep.rows()[0][2:] == ("L2([0,T]xK)", 0.5, 0.5)
        assert np.all(rep.constraint_residuals == 0)

    def test_combined_zonal_sweep_against_frozen_profile(self):
        # inviscid-limit comparison on zonal data: only the eps^alpha diffusion separates them
        grid = GridSpec(8, 128)
        theta0 = make_ill_prepared_data(ZONAL, 0.1, grid)
        cfg = SolverConfig(dt_max=0.02, t_end=0.5)
        sweep = [integrate(theta0, Combined(e, 1.0), cfg) for e in (0.2, 0.1, 0.05)]
        rep = convergence_metric(sweep, limit=evolve_combined_limit)
        assert rep.strictly_decreasing
        assert rep.deviations[0] / rep.deviations[-1] == pytest.approx(4, rel=0.05)

    def test_metric_matches_hand_integral(self):
        grid = GridSpec(8, 64)
        theta0 = make_ill_prepared_data(ZONAL, 0.1, grid)
        tr = integrate(theta0, Combined(0.5, 1.0), SolverConfig(dt_max=0.05, t_end=0.2))
        rep = convergence_metric([tr], limit=evolve_combined_limit, K_fraction=1.0)
        diffs = [np.sqrt(grid.area * np.sum(np.abs(s.coeffs[:, 0] - theta0.coeffs[:, 0]) ** 2)) for s in tr.snapshots]
        want = math.sqrt(np.trapezoid(np.square(diffs), tr.times))
        assert rep.deviations[0] == pytest.approx(want, rel=1e-10)

    def test_grid_mismatch(self):
        a, b = zero_run(GridSpec(8, 16)), zero_run(GridSpec(8, 32))
        with pytest.raises(ValueError, match="grid"):
            convergence_metric([a, b])

    def test_horizon_mismatch(self):
        a, b = zero_run(GridSpec(8, 16), 0.2), zero_run(GridSpec(8, 16), 0.3)
        with pytest.raises(ValueError, match="horizon"):
            convergence_metric([a, b])

    def test_empty(self):
        with pytest.raises(ValueError):
            convergence_metric([])
