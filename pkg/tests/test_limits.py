import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqglimit.limits import (
    ZonalProfile,
    embed_zonal,
    evolve_combined_limit,
    evolve_fast_rotation_limit,
    project_to_zonal,
)
from sqglimit.snapshot import (
    SnapshotFormatError,
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    read_zonal_csv,
    write_snapshot,
    write_zonal_csv,
)
from sqglimit.solver import FixedViscosity, IllPreparedFamily, SolverConfig, integrate, make_ill_prepared_data
from sqglimit.spectral import (
    GridSpec,
    PhysicalField,
    forward_transform,
    horizontal_mean,
    inverse_transform,
    l2_norm,
    random_field,
)


def random_profile(grid, seed):
    return project_to_zonal(random_field(grid, np.random.default_rng(seed)))


class TestFastRotationLimit:
    def test_identity_at_zero(self):
        p = random_profile(GridSpec(8, 64), 0)
        assert np.array_equal(evolve_fast_rotation_limit(p, 0.5, 0.0).coeffs, p.coeffs)

    def test_single_mode_decay(self):
        grid = GridSpec(8, 32, L2=np.pi)
        p = ZonalProfile.from_values(grid, np.cos(grid.x2[:, 0]))
        out = evolve_fast_rotation_limit(p, 0.3, 2.0)
        assert np.allclose(out.values(), np.exp(-0.6) * np.cos(grid.x2[:, 0]), atol=1e-14)

    def test_semigroup(self):
        p = random_profile(GridSpec(8, 128), 1)
        a = evolve_fast_rotation_limit(evolve_fast_rotation_limit(p, 0.7, 0.4), 0.7, 1.1)
        b = evolve_fast_rotation_limit(p, 0.7, 1.5)
        assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-14 * np.max(np.abs(p.coeffs))

    def test_negative_time(self):
        with pytest.raises(ValueError):
            evolve_fast_rotation_limit(random_profile(GridSpec(8, 16), 2), 0.5, -1.0)

    def test_contraction(self):
        p = random_profile(GridSpec(8, 128), 3)
        out = evolve_fast_rotation_limit(p, 0.5, 0.3)
        assert out.norm() < p.norm()

    def test_constant_profile_preserved(self):
        grid = GridSpec(8, 16)
        p = ZonalProfile.from_values(grid, np.full(16, 2.0))
        assert evolve_fast_rotation_limit(p, 1.0, 5.0).norm() == pytest.approx(p.norm(), rel=1e-15)

    def test_matches_solver_on_zonal_data(self):
        grid = GridSpec(16, 256)
        theta0 = make_ill_prepared_data(IllPreparedFamily(amp=0.0), 0.05, grid)
        tr = integrate(theta0, FixedViscosity(0.05, 0.5), SolverConfig(dt_max=0.05, t_end=1.0))
        want = evolve_fast_rotation_limit(project_to_zonal(theta0), 0.5, 1.0)
        got = project_to_zonal(tr.snapshots[-1])
        assert np.linalg.norm(got.coeffs - want.coeffs) <= 1e-8 * np.linalg.norm(want.coeffs)


class TestCombinedLimit:
    def test_frozen(self):
        p = random_profile(GridSpec(8, 64), 4)
        assert np.array_equal(evolve_combined_limit(p, 7.3).coeffs, p.coeffs)

    def test_zero(self):
        grid = GridSpec(8, 16)
        p = ZonalProfile(grid, np.zeros(16))
        assert np.all(evolve_combined_limit(p, 1.0).coeffs == 0)

    def test_agrees_with_inviscid_heat_flow(self):
        p = random_profile(GridSpec(8, 64), 5)
        assert np.array_equal(evolve_combined_limit(p, 2.0).coeffs, evolve_fast_rotation_limit(p, 0.0, 2.0).coeffs)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            evolve_combined_limit(random_profile(GridSpec(8, 16), 6), -0.1)


class TestZonalProjection:
    def test_roundtrip_on_zonal_fields(self):
        grid = GridSpec(16, 64)
        g = horizontal_mean(random_field(grid, np.random.default_rng(7)))
        assert np.array_equal(embed_zonal(project_to_zonal(g)).coeffs, g.coeffs)

    def test_projection_matches_horizontal_mean(self):
        grid = GridSpec(16, 64)
        g = random_field(grid, np.random.default_rng(8))
        assert np.array_equal(embed_zonal(project_to_zonal(g)).coeffs, horizontal_mean(g).coeffs)

    def test_oscillation_projects_to_zero(self):
        grid = GridSpec(16, 64)
        g = forward_transform(PhysicalField.from_function(grid, lambda x1, x2: np.cos(x1) * np.exp(-(x2**2))))
        assert np.max(np.abs(project_to_zonal(g).coeffs)) <= 1e-16

    def test_norm_inequality(self):
        grid = GridSpec(16, 64)
        g = random_field(grid, np.random.default_rng(9))
        assert project_to_zonal(g).norm() < l2_norm(g)
        z = horizontal_mean(g)
        assert project_to_zonal(z).norm() == pytest.approx(l2_norm(z), rel=1e-14)

    def test_profile_values_match_physical_field(self):
        grid = GridSpec(16, 64)
        z = horizontal_mean(random_field(grid, np.random.default_rng(10)))
        vals = inverse_transform(z).values
        assert np.allclose(project_to_zonal(z).values(), vals[:, 0], atol=1e-14)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            ZonalProfile(GridSpec(8, 16), np.zeros(8))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.0, 5.0), st.floats(0.0, 3.0))
    def test_evolutions_commute_with_retraction(self, seed, nu, t):
        grid = GridSpec(8, 32)
        g = random_field(grid, np.random.default_rng(seed))
        p = project_to_zonal(g)
        rt = project_to_zonal(embed_zonal(p))
        a = evolve_fast_rotation_limit(rt, nu, t).coeffs
        b = project_to_zonal(embed_zonal(evolve_fast_rotation_limit(p, nu, t))).coeffs
        assert np.array_equal(a, b)
        assert np.array_equal(evolve_combined_limit(rt, t).coeffs, p.coeffs)


class TestSerialisation:
    def test_snapshot_roundtrip(self, tmp_path):
        grid = GridSpec(16, 32, L2=5.0)
        f = inverse_transform(random_field(grid, np.random.default_rng(11)))
        n = write_snapshot(tmp_path / "a.sqgf", f)
        assert n == 4 + 1 + 8 + 16 + 8 * 16 * 32
        back = read_snapshot(tmp_path / "a.sqgf")
        assert back.grid == grid
        assert np.array_equal(back.values, f.values)

    def test_header_layout(self):
        grid = GridSpec(4, 6)
        data = encode_snapshot(PhysicalField(grid, np.arange(24.0).reshape(6, 4)))
        assert data[:5] == b"SQGF\x01"
        assert int.from_bytes(data[5:9], "little") == 4
        assert int.from_bytes(data[9:13], "little") == 6
        # x1 fastest: the second stored value is the point (x1 index 1, x2 index 0)
        assert np.frombuffer(data[29:45], "<f8").tolist() == [0.0, 1.0]

    def test_zonal_snapshot(self):
        grid = GridSpec(8, 32)
        p = random_profile(grid, 12)
        back = decode_snapshot(encode_snapshot(p))
        assert isinstance(back, ZonalProfile)
        assert np.allclose(back.coeffs, p.coeffs, atol=1e-15)

    @pytest.mark.parametrize(
        "mutate,msg",
        [
            (lambda d: b"XXXX" + d[4:], "magic"),
            (lambda d: d[:4] + b"\x02" + d[5:], "version"),
            (lambda d: d[:-8], "value bytes"),
            (lambda d: d[:10], "truncated"),
        ],
    )
    def test_corrupt_snapshot(self, mutate, msg):
        data = encode_snapshot(PhysicalField(GridSpec(4, 4), np.zeros((4, 4))))
        with pytest.raises(SnapshotFormatError, match=msg):
            decode_snapshot(mutate(data))

    def test_zonal_csv_roundtrip(self, tmp_path):
        grid = GridSpec(8, 32)
        p = random_profile(grid, 13)
        write_zonal_csv(tmp_path / "p.csv", p)
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "k,Re,Im" and len(lines) == 33
        assert np.array_equal(read_zonal_csv(tmp_path / "p.csv", grid).coeffs, p.coeffs)
