import csv
import json

import numpy as np
import pytest

from luxsim.errors import NumericalError
from luxsim.formfactor import FormFactorMatrix, compute_form_factors, sensor_gain_rows
from luxsim.mesh import TriangleMesh, derive_patches
from luxsim.photometry import flat_curve
from luxsim.radiosity import (
    assemble,
    check_invariants,
    export_luxmeter_json,
    export_solution_csv,
    illuminance,
    luxmeter_read,
    neumann_solve,
    radiance_to_illuminance,
    solve,
)
from luxsim.raycast import build_accel
from luxsim.sampling import SamplerConfig


def uniform_cube_ff(patches):
    """Exact closed-enclosure matrix for 12 equal-area patches: f_ij = 1/11
    off the diagonal (reciprocal, unit row sums)."""
    n = len(patches)
    values = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(values, 0.0)
    areas = np.asarray([p.area for p in patches])
    return FormFactorMatrix(values=values, areas=areas, escape=np.zeros(n))


def random_system(rng, n):
    """Random valid form factors (row sums <= 1) and reflectances < 0.9."""
    F = rng.random((n, n))
    np.fill_diagonal(F, 0.0)
    F /= F.sum(axis=1, keepdims=True) * rng.uniform(1.0, 1.25)
    rho = rng.uniform(0.0, 0.9, size=n)
    e = np.where(rng.random(n) < 0.2, rng.uniform(1.0, 100.0, size=n), 0.0)
    return F, rho, e


def system_from_arrays(patches, F, rho, e):
    for p, r in zip(patches, rho):
        p.albedo = float(r)
    areas = np.asarray([p.area for p in patches])
    ff = FormFactorMatrix(values=F, areas=areas, escape=1.0 - F.sum(axis=1))
    return assemble(patches, ff, emission=e)


class TestAssemble:
    def test_zero_reflectance_is_identity(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.0
        ff = uniform_cube_ff(cube_patches)
        system = assemble(cube_patches, ff, emission=np.zeros(12))
        assert np.array_equal(system.matrix, np.eye(12))

    def test_two_patch_matrix_values(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1]], dtype=float)
        faces = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int64)
        patches = derive_patches(TriangleMesh(vertices=verts, faces=faces), normal_orientation="as-authored")
        for p in patches:
            p.albedo = 0.5
        ff = FormFactorMatrix(
            values=np.array([[0.0, 1.0], [1.0, 0.0]]),
            areas=np.array([p.area for p in patches]),
            escape=np.zeros(2),
        )
        system = assemble(patches, ff, emission=np.zeros(2))
        assert np.allclose(system.matrix, [[1.0, -0.5], [-0.5, 1.0]])

    def test_emission_vector_placement(self, cube_patches):
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[2] = e[3] = 7913.0 / 1.0  # ceiling patches, 1 m^2 together
        system = assemble(cube_patches, ff, emission=e)
        assert np.count_nonzero(system.emission) == 2
        assert system.emission[2] == 7913.0

    def test_reflectance_bound_enforced(self, cube_patches):
        cube_patches[5].albedo = 1.0
        ff = uniform_cube_ff(cube_patches)
        with pytest.raises(ValueError, match="patch 5"):
            assemble(cube_patches, ff)


class TestSolve:
    def test_zero_reflectance_returns_emission(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.0
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[0] = 3.5
        for method in ("direct", "jacobi", "gauss-seidel"):
            sol = solve(assemble(cube_patches, ff, emission=e), method=method, tol=1e-12)
            assert np.allclose(sol.radiosity, e, atol=1e-12)

    def test_uniform_enclosure_analytic(self, cube_patches):
        # uniform rho = 0.5 and e = 1 in a closed enclosure: r = e/(1-rho) = 2
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), method="direct")
        assert np.abs(sol.radiosity - 2.0).max() <= 1e-9

    def test_cross_solver_agreement(self, cube_patches):
        rng = np.random.default_rng(21)
        verts = rng.random((15, 3))
        faces = np.array([[3 * i, 3 * i + 1, 3 * i + 2] for i in range(5)], dtype=np.int64)
        patches = derive_patches(TriangleMesh(vertices=verts, faces=faces), normal_orientation="as-authored")
        F, rho, e = random_system(rng, 5)
        e[0] = 10.0
        system = system_from_arrays(patches, F, rho, e)
        direct = solve(system, "direct").radiosity
        jacobi = solve(system, "jacobi", tol=1e-12, max_iter=5000).radiosity
        gs = solve(system, "gauss-seidel", tol=1e-12, max_iter=5000).radiosity
        scale = np.abs(direct).max()
        assert np.abs(jacobi - direct).max() / scale <= 1e-8
        assert np.abs(gs - direct).max() / scale <= 1e-8

    def test_neumann_oracle_agreement(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.7
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[4] = 50.0
        system = assemble(cube_patches, ff, emission=e)
        direct = solve(system, "direct").radiosity
        series = neumann_solve(ff.values, system.rho, e, tail_tol=1e-12)
        assert np.abs(series - direct).max() <= 1e-6

    def test_nonconvergence_carries_residual(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.9
        ff = uniform_cube_ff(cube_patches)
        system = assemble(cube_patches, ff, emission=np.ones(12))
        with pytest.raises(NumericalError) as err:
            solve(system, "jacobi", tol=1e-14, max_iter=3)
        assert err.value.residual is not None

    def test_eq1_consistency(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.6
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[1] = 5.0
        sol = solve(assemble(cube_patches, ff, emission=e), "direct")
        assert np.abs(sol.radiosity - e - 0.6 * sol.irradiance).max() <= 1e-9

    def test_unknown_method(self, cube_patches):
        ff = uniform_cube_ff(cube_patches)
        with pytest.raises(ValueError):
            solve(assemble(cube_patches, ff, emission=np.zeros(12)), "cholesky")


class TestIlluminance:
    def test_reflective_identity(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct")
        E = illuminance(sol)
        # E = H must match (r - e)/rho on reflective patches
        assert np.allclose(E, (sol.radiosity - sol.emission) / 0.5, atol=1e-9)
        assert np.allclose(E, 2.0, atol=1e-9)

    def test_emission_excluded(self, cube_patches):
        # a luminaire with e >> rho*H reports only the incident light
        for p in cube_patches:
            p.albedo = 0.1
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[0] = 1000.0
        sol = solve(assemble(cube_patches, ff, emission=e), "direct")
        E = illuminance(sol)
        assert E[0] < sol.radiosity[0]
        assert E[0] == pytest.approx(sol.irradiance[0])

    def test_radiance_conversion_helper(self):
        # E = L pi / rho: 100 * pi / 0.5
        assert radiance_to_illuminance(100.0, 0.5) == pytest.approx(628.3185307179587, abs=1e-9)
        with pytest.raises(ValueError):
            radiance_to_illuminance(1.0, 0.0)


class TestLuxmeter:
    def test_flat_lsc_uniform_enclosure(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct", scenario="s1")
        sol.sensor_gain_rows = {0: ff.values[0].copy()}  # flat curve keeps the geometric row
        readings = luxmeter_read(sol, [0])
        assert readings[0].lux == pytest.approx(2.0, abs=1e-9)
        assert readings[0].scenario == "s1"

    def test_zero_sensitivity_reads_zero(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct")
        sol.sensor_gain_rows = {0: np.zeros(12)}
        assert luxmeter_read(sol, [0])[0].lux == 0.0

    def test_unknown_sensor_id(self, cube_patches):
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.zeros(12)), "direct")
        with pytest.raises(ValueError, match="99"):
            luxmeter_read(sol, [99])

    def test_occluded_sensor_direct_light_only(self):
        # luminaire plate up top, occluder plate in between, sensor below:
        # with rho = 0 everywhere the sensor sees nothing
        verts = np.array(
            [
                [-1, -1, 2], [1, -1, 2], [1, 1, 2], [-1, 1, 2],      # luminaire z=2
                [-1.5, -1.5, 1], [1.5, -1.5, 1], [1.5, 1.5, 1], [-1.5, 1.5, 1],  # occluder z=1
                [-0.1, -0.1, 0], [0.1, -0.1, 0], [0.1, 0.1, 0], [-0.1, 0.1, 0],  # sensor z=0
            ],
            dtype=float,
        )
        faces = np.array(
            [[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7], [8, 9, 10], [8, 10, 11]],
            dtype=np.int64,
        )
        patches = derive_patches(TriangleMesh(vertices=verts, faces=faces), normal_orientation="as-authored")
        for p in patches:
            p.albedo = 0.0
            want_up = p.id >= 4
            want = np.array([0.0, 0.0, 1.0]) if want_up else np.array([0.0, 0.0, -1.0])
            if np.dot(p.normal, want) < 0:
                p.normal = -p.normal
        accel = build_accel(patches)
        sampler = SamplerConfig(method="isocell", rays=1000)
        ff = compute_form_factors(patches, accel, sampler)
        e = np.zeros(6)
        e[0] = e[1] = 100.0
        sol = solve(assemble(patches, ff, emission=e), "direct")
        rows = sensor_gain_rows(patches, accel, sampler, {4: flat_curve("LSC")})
        sol.sensor_gain_rows = rows
        assert luxmeter_read(sol, [4])[0].lux == 0.0


class TestProperties:
    def test_energy_bound_closed_scene(self, cube_patches):
        rng = np.random.default_rng(9)
        ff = uniform_cube_ff(cube_patches)
        for trial in range(20):
            rho = rng.uniform(0.0, 0.95, size=12)
            for p, r in zip(cube_patches, rho):
                p.albedo = float(r)
            e = np.where(rng.random(12) < 0.3, rng.uniform(0, 100, 12), 0.0)
            sol = solve(assemble(cube_patches, ff, emission=e), "direct")
            areas = ff.areas
            bound = (areas * e).sum() / (1.0 - rho.max())
            assert (areas * sol.radiosity).sum() <= bound + 1e-9
            assert np.all(sol.radiosity >= e - 1e-12)

    def test_monotonic_in_emission(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        e = np.zeros(12)
        e[0] = 10.0
        base = solve(assemble(cube_patches, ff, emission=e), "direct").radiosity
        e2 = e.copy()
        e2[7] += 5.0
        bigger = solve(assemble(cube_patches, ff, emission=e2), "direct").radiosity
        assert np.all(bigger >= base - 1e-12)

    def test_superposition(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        ea = np.zeros(12)
        eb = np.zeros(12)
        ea[0] = 20.0
        eb[5] = 30.0
        tol = 1e-9
        ra = solve(assemble(cube_patches, ff, emission=ea), "direct", tol=tol).radiosity
        rb = solve(assemble(cube_patches, ff, emission=eb), "direct", tol=tol).radiosity
        rab = solve(assemble(cube_patches, ff, emission=ea + eb), "direct", tol=tol).radiosity
        assert np.abs(rab - (ra + rb)).max() <= 2 * tol * max(np.abs(rab).max(), 1.0)

    def test_check_invariants_flags_bad_solution(self, cube_patches):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct")
        assert check_invariants(sol, ff) == []
        sol.radiosity = sol.radiosity * 0.5  # break the balance
        assert check_invariants(sol, ff)


class TestExports:
    def test_solution_csv(self, cube_patches, tmp_path):
        for p in cube_patches:
            p.albedo = 0.5
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct")
        path = tmp_path / "sol.csv"
        export_solution_csv(path, sol, cube_patches)
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 12
        assert set(rows[0]) == {"patch_id", "area_m2", "radiosity", "irradiance_lux", "illuminance_lux"}
        assert float(rows[0]["radiosity"]) == pytest.approx(2.0)

    def test_luxmeter_json(self, cube_patches, tmp_path):
        ff = uniform_cube_ff(cube_patches)
        sol = solve(assemble(cube_patches, ff, emission=np.ones(12)), "direct", scenario="all_on")
        readings = luxmeter_read(sol, [0, 2])
        path = tmp_path / "lux.json"
        export_luxmeter_json(path, readings, {0: "S1", 2: "S2"})
        data = json.loads(path.read_text())
        assert data[0] == {"scenario": "all_on", "sensor_id": "S1", "lux": data[0]["lux"]}
        assert {d["sensor_id"] for d in data} == {"S1", "S2"}
