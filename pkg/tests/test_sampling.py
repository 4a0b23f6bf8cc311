import numpy as np
import pytest

from luxsim.sampling import (
    DirectionSet,
    SamplerConfig,
    isocell_directions,
    isocell_ring_layout,
    monte_carlo_directions,
    orthonormal_basis,
    realized_isocell_count,
    to_world_frame,
)

from oracles import disc_quadrature_mean, parallel_plate_view_factor, plate_hit_fraction


def check_unit_upper_hemisphere(dset: DirectionSet):
    norms = np.linalg.norm(dset.directions, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-12)
    assert np.all(dset.directions[:, 2] > 0.0)


class TestIsocell:
    def test_realized_counts(self):
        # smallest 3*R^2 >= target
        assert realized_isocell_count(1) == 3
        assert realized_isocell_count(3) == 3
        assert realized_isocell_count(4) == 12
        assert realized_isocell_count(12) == 12
        assert realized_isocell_count(13) == 27
        assert realized_isocell_count(1000) == 1083  # 3 * 19^2

    def test_single_ring(self):
        dset = isocell_directions(3)
        assert dset.count == 3
        check_unit_upper_hemisphere(dset)
        layout = isocell_ring_layout(1)
        assert layout == [(0.0, 1.0, 3)]

    def test_cell_areas_equal(self):
        # ring area pi*(2j-1)/R^2 split into 3*(2j-1) sectors: every cell
        # covers exactly pi / realized_count
        for rings in (1, 2, 5, 19):
            total = 3 * rings * rings
            for r0, r1, cells in isocell_ring_layout(rings):
                ring_area = np.pi * (r1 * r1 - r0 * r0)
                assert ring_area / cells == pytest.approx(np.pi / total, abs=1e-12)

    def test_count_invariant_and_validation(self):
        dset = isocell_directions(1000)
        assert dset.count == 1083
        check_unit_upper_hemisphere(dset)
        with pytest.raises(ValueError):
            isocell_directions(0)

    def test_deterministic(self):
        a = isocell_directions(1000)
        b = isocell_directions(1000)
        assert np.array_equal(a.directions, b.directions)
        assert np.array_equal(a.disc_points, b.disc_points)

    def test_mean_cosine_matches_quadrature(self):
        # E[cos theta] = 2/3 under cosine-weighted sampling; verify the
        # constant by quadrature, then the sampler against it
        expected = disc_quadrature_mean(lambda t: np.cos(np.radians(t)))
        assert expected == pytest.approx(2.0 / 3.0, abs=1e-6)
        dset = isocell_directions(1000)
        assert float(dset.directions[:, 2].mean()) == pytest.approx(expected, abs=0.01)

    def test_every_ray_lands_on_hemisphere(self):
        # form factor of the enclosing hemisphere is exactly 1: all samples
        # lift to valid upward unit directions
        dset = isocell_directions(300)
        assert np.all(dset.directions[:, 2] > 0.0)
        assert dset.disc_points.shape == (dset.count, 2)
        assert np.all(np.linalg.norm(dset.disc_points, axis=1) < 1.0)


class TestMonteCarlo:
    def test_single_direction(self):
        dset = monte_carlo_directions(1, seed=7)
        assert dset.count == 1
        check_unit_upper_hemisphere(dset)

    def test_seed_reproducibility(self):
        a = monte_carlo_directions(500, seed=42)
        b = monte_carlo_directions(500, seed=42)
        assert np.array_equal(a.directions, b.directions)
        c = monte_carlo_directions(500, seed=43)
        assert not np.array_equal(a.directions, c.directions)

    def test_cosine_tail_probability(self):
        # P(cos theta > c) = 1 - c^2 under cosine weighting
        dset = monte_carlo_directions(100_000, seed=1)
        frac = float(np.mean(dset.directions[:, 2] > 0.5))
        assert frac == pytest.approx(0.75, abs=0.01)

    def test_validation(self):
        with pytest.raises(ValueError):
            monte_carlo_directions(0, seed=0)


class TestWorldFrame:
    def test_identity_for_plus_z(self):
        dset = isocell_directions(27)
        world = to_world_frame(dset, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(world, dset.directions, atol=1e-15)

    def test_flip_for_minus_z(self):
        dset = isocell_directions(27)
        world = to_world_frame(dset, np.array([0.0, 0.0, -1.0]))
        assert np.all(world[:, 2] < 0.0)

    def test_plus_x_maps_normal(self):
        dset = DirectionSet(
            directions=np.array([[0.0, 0.0, 1.0]]),
            disc_points=np.array([[0.0, 0.0]]),
            method="isocell",
        )
        world = to_world_frame(dset, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(world[0], [1.0, 0.0, 0.0], atol=1e-12)

    def test_basis_orthonormal_everywhere(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            basis = orthonormal_basis(n)
            assert np.allclose(basis @ basis.T, np.eye(3), atol=1e-12)
            # right-handed: t x b = n
            assert np.allclose(np.cross(basis[0], basis[1]), basis[2], atol=1e-12)

    def test_rejects_non_unit_normal(self):
        dset = isocell_directions(3)
        with pytest.raises(ValueError):
            to_world_frame(dset, np.array([0.0, 0.0, 2.0]))


class TestEstimatorQuality:
    def test_isocell_beats_median_monte_carlo(self):
        # differential patch under a parallel 1 m x 1 m plate at h = 1:
        # the deterministic set at 1083 rays must not err more than the
        # median of 100 seeded Monte Carlo estimates at the same budget
        truth = parallel_plate_view_factor(0.5, 0.5, 1.0)
        iso = isocell_directions(1000)
        iso_err = abs(plate_hit_fraction(iso.disc_points, 0.5) - truth)
        mc_errs = []
        for seed in range(100):
            mc = monte_carlo_directions(iso.count, seed)
            mc_errs.append(abs(plate_hit_fraction(mc.disc_points, 0.5) - truth))
        assert iso_err <= float(np.median(mc_errs))


class TestSamplerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(method="bogus")
        with pytest.raises(ValueError):
            SamplerConfig(rays=0)

    def test_realized_count(self):
        assert SamplerConfig(method="isocell", rays=1000).realized_count() == 1083
        assert SamplerConfig(method="monte-carlo", rays=1000).realized_count() == 1000

    def test_per_patch_streams(self):
        cfg = SamplerConfig(method="monte-carlo", rays=64, seed=9)
        a = cfg.directions_for_patch(0)
        b = cfg.directions_for_patch(1)
        assert not np.array_equal(a.directions, b.directions)
        assert np.array_equal(a.directions, cfg.directions_for_patch(0).directions)
        iso = SamplerConfig(method="isocell", rays=64)
        assert np.array_equal(
            iso.directions_for_patch(0).directions, iso.directions_for_patch(5).directions
        )
