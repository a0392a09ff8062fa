"""Head-pose sampling: rejection bound, determinism, distribution shape."""

import numpy as np
import pytest
from scipy.integrate import quad

from gazesynth.sampler import PoseSamplerConfig, load_pose_list, sample_poses


class TestBasics:
    def test_sigma_zero_gives_origin(self):
        cfg = PoseSamplerConfig(mode="gaussian", sigma_deg=0.0, poses_per_source=8, seed=1)
        np.testing.assert_array_equal(sample_poses(cfg), np.zeros((8, 2)))

    def test_sixty_sixty_exceeds_bound(self):
        # sqrt(60^2 + 60^2) = 84.85 > 80, so such a pose can never be emitted.
        assert np.hypot(60.0, 60.0) > 80.0
        pool = np.array([[60.0, 60.0], [5.0, 5.0]])
        cfg = PoseSamplerConfig(mode="target_list", poses_per_source=64, seed=3)
        poses = sample_poses(cfg, target_list=pool)
        norms = np.hypot(poses[:, 0], poses[:, 1])
        assert np.all(norms <= 80.0)
        assert not np.any(np.all(poses == [60.0, 60.0], axis=1))

    def test_every_pose_satisfies_bound(self):
        cfg = PoseSamplerConfig(mode="gaussian", sigma_deg=40.0, poses_per_source=2000, seed=5)
        poses = sample_poses(cfg)
        assert len(poses) == 2000
        assert np.all(np.hypot(poses[:, 0], poses[:, 1]) <= 80.0)

    def test_output_is_yaw_pitch_order(self):
        # A list with a single in-bound pose pins the order: rows are
        # (pitch, yaw) in the file, output pairs are (yaw, pitch).
        pool = np.array([[10.0, 30.0]])  # pitch 10, yaw 30
        cfg = PoseSamplerConfig(mode="target_list", poses_per_source=3, seed=0)
        poses = sample_poses(cfg, target_list=pool)
        np.testing.assert_array_equal(poses, np.tile([30.0, 10.0], (3, 1)))


class TestDeterminism:
    def test_same_seed_same_sequence(self):
        cfg = PoseSamplerConfig(mode="gaussian", sigma_deg=20.0, poses_per_source=16, seed=7)
        np.testing.assert_array_equal(sample_poses(cfg), sample_poses(cfg))

    def test_different_seeds_differ(self):
        outs = []
        for seed in range(10):
            cfg = PoseSamplerConfig(
                mode="gaussian", sigma_deg=20.0, poses_per_source=16, seed=seed
            )
            outs.append(sample_poses(cfg))
        for i in range(10):
            for j in range(i + 1, 10):
                assert not np.array_equal(outs[i], outs[j])


class TestDistribution:
    def test_std_matches_truncated_normal_quadrature(self):
        sigma, bound = 20.0, 80.0
        cfg = PoseSamplerConfig(
            mode="gaussian", sigma_deg=sigma, poses_per_source=100_000, seed=11
        )
        poses = sample_poses(cfg)

        # Independent oracle: E[yaw^2] under the radially truncated
        # isotropic normal, by numeric quadrature over the radial density.
        density = lambda r: (r / sigma**2) * np.exp(-(r**2) / (2 * sigma**2))
        mass, _ = quad(density, 0.0, bound)
        second_moment, _ = quad(lambda r: r**2 * density(r), 0.0, bound)
        predicted_std = np.sqrt(second_moment / mass / 2.0)

        for column in (0, 1):
            sample_std = poses[:, column].std()
            assert abs(sample_std - predicted_std) / predicted_std < 0.05


class TestErrors:
    def test_no_target_pose_within_bound(self):
        pool = np.array([[90.0, 90.0], [100.0, 0.0]])
        cfg = PoseSamplerConfig(mode="target_list", poses_per_source=4, seed=0)
        with pytest.raises(ValueError):
            sample_poses(cfg, target_list=pool)

    def test_empty_target_list(self):
        cfg = PoseSamplerConfig(mode="target_list", poses_per_source=4, seed=0)
        with pytest.raises(ValueError):
            sample_poses(cfg, target_list=None)

    def test_rejection_draw_cap(self):
        # Acceptance probability ~1e-7: the cap must trip, not hang.
        cfg = PoseSamplerConfig(
            mode="gaussian", sigma_deg=5000.0, poses_per_source=100, rejection_norm_deg=1.0, seed=0
        )
        with pytest.raises(RuntimeError):
            sample_poses(cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PoseSamplerConfig(mode="uniform")
        with pytest.raises(ValueError):
            PoseSamplerConfig(poses_per_source=0)
        with pytest.raises(ValueError):
            PoseSamplerConfig(rejection_norm_deg=0.0)


class TestPoseListFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "poses.txt"
        path.write_text("# pitch yaw\n10.0 20.0\n-5.5 3.25\n\n0 0\n")
        pool = load_pose_list(path)
        np.testing.assert_array_equal(pool, [[10.0, 20.0], [-5.5, 3.25], [0.0, 0.0]])

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "poses.txt"
        path.write_text("1.0 2.0\n3.0\n")
        with pytest.raises(ValueError, match=":2"):
            load_pose_list(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "poses.txt"
        path.write_text("# nothing\n")
        with pytest.raises(ValueError):
            load_pose_list(path)
