import numpy as np
import pytest
from scipy.linalg import logm

from hvio.errors import DegenerateAlignment, DeltaTooLarge, NoOverlap
from hvio.geometry import Pose, Rotation
from hvio.metrics import (
    MetricsReport,
    Trajectory,
    align_umeyama,
    associate,
    ate,
    evaluate,
    rpe,
    sd,
)

from conftest import random_rotation


def brute_force_log_norm(t_gt: Pose, t_est: Pose) -> float:
    """Independent oracle: generic matrix logarithm of the 4x4 error transform."""
    err = np.linalg.inv(t_gt.as_matrix()) @ t_est.as_matrix()
    lg = logm(err)
    lg = np.real(lg)
    phi = np.array([lg[2, 1], lg[0, 2], lg[1, 0]])
    rho = lg[:3, 3]
    return float(np.sqrt(rho @ rho + phi @ phi))


def random_trajectory(rng, n, max_angle=2.5):
    ts = np.cumsum(rng.uniform(0.05, 0.2, n))
    poses = [Pose(random_rotation(rng, max_angle), rng.normal(size=3)) for _ in range(n)]
    return Trajectory(ts, poses)


class TestAte:
    def test_perfect_estimate(self):
        rng = np.random.default_rng(70)
        traj = random_trajectory(rng, 10)
        pairs = list(zip(traj.poses, traj.poses))
        rmse, series = ate(pairs)
        assert rmse == 0.0
        assert (series == 0).all()

    def test_two_pose_hand_case(self):
        gt = [Pose.identity(), Pose.identity()]
        est = [Pose.identity(), Pose(Rotation.identity(), [0.1, 0.0, 0.0])]
        rmse, series = ate(list(zip(gt, est)))
        assert rmse == pytest.approx(np.sqrt(0.01 / 2), abs=1e-9)
        assert rmse == pytest.approx(0.070711, abs=1e-6)
        assert series[0] == 0.0
        assert series[1] == pytest.approx(0.1, abs=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(71)
        gt = random_trajectory(rng, 20)
        est = random_trajectory(rng, 20)
        pairs = list(zip(gt.poses, est.poses))
        rmse, series = ate(pairs)
        expected = [brute_force_log_norm(g, e) for g, e in pairs]
        assert np.allclose(series, expected, atol=1e-10)
        assert rmse == pytest.approx(np.sqrt(np.mean(np.square(expected))), abs=1e-10)

    def test_translation_variant(self):
        gt = [Pose.identity()]
        est = [Pose(Rotation.exp([0, 0, 1.0]), [0.3, 0.4, 0.0])]
        rmse, _ = ate(list(zip(gt, est)), variant="trans")
        assert rmse == pytest.approx(0.5, abs=1e-12)


class TestRpe:
    def test_perfect_estimate(self):
        rng = np.random.default_rng(72)
        traj = random_trajectory(rng, 8)
        rmse, _ = rpe(list(zip(traj.poses, traj.poses)), 1)
        assert rmse == 0.0

    def test_two_pose_hand_case(self):
        gt = [Pose.identity(), Pose.identity()]
        est = [Pose.identity(), Pose(Rotation.identity(), [0.1, 0.0, 0.0])]
        rmse, series = rpe(list(zip(gt, est)), 1)
        assert rmse == pytest.approx(0.1, abs=1e-12)
        assert len(series) == 1

    def test_invariant_to_global_transform_of_estimate(self):
        rng = np.random.default_rng(73)
        gt = random_trajectory(rng, 12)
        g = Pose(random_rotation(rng), rng.normal(size=3))
        est_poses = [g @ p for p in gt.poses]
        rmse, _ = rpe(list(zip(gt.poses, est_poses)), 1)
        assert rmse < 1e-9

    def test_delta_too_large(self):
        rng = np.random.default_rng(74)
        traj = random_trajectory(rng, 5)
        with pytest.raises(DeltaTooLarge):
            rpe(list(zip(traj.poses, traj.poses)), 5)


class TestSd:
    def test_constant_series(self):
        assert sd([0.7, 0.7, 0.7]) == 0.0

    def test_hand_case(self):
        assert sd([0.0, 0.2]) == pytest.approx(0.1, abs=1e-15)

    def test_ate_example_series(self):
        assert sd([0.0, 0.1]) == pytest.approx(0.05, abs=1e-15)

    def test_zero_iff_constant(self):
        rng = np.random.default_rng(75)
        for _ in range(20):
            s = rng.normal(size=8)
            assert (sd(s) == 0.0) == bool(np.allclose(s, s[0], atol=0))


class TestInvariances:
    def test_both_transformed_identically(self):
        rng = np.random.default_rng(76)
        gt = random_trajectory(rng, 15)
        est = random_trajectory(rng, 15)
        g = Pose(random_rotation(rng), rng.normal(size=3))
        pairs = list(zip(gt.poses, est.poses))
        pairs_t = [(g @ a, g @ b) for a, b in pairs]
        assert ate(pairs)[0] == pytest.approx(ate(pairs_t)[0], abs=1e-9)
        assert rpe(pairs, 2)[0] == pytest.approx(rpe(pairs_t, 2)[0], abs=1e-9)

    def test_brute_force_equivalence_many(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            n = int(rng.integers(2, 50))
            gt = random_trajectory(rng, n)
            est = random_trajectory(rng, n)
            pairs = list(zip(gt.poses, est.poses))
            _, series = ate(pairs)
            expected = [brute_force_log_norm(g, e) for g, e in pairs]
            assert np.allclose(series, expected, atol=1e-10)


class TestAssociate:
    def test_identical_timestamps(self):
        rng = np.random.default_rng(78)
        gt = random_trajectory(rng, 10)
        est = Trajectory(gt.timestamps.copy(), gt.poses)
        pairs = associate(gt, est, 0.01)
        assert len(pairs) == 10

    def test_half_offset(self):
        rng = np.random.default_rng(79)
        gt = random_trajectory(rng, 10)
        est = Trajectory(gt.timestamps + 0.01, gt.poses)
        pairs = associate(gt, est, 0.02)
        assert len(pairs) == 10

    def test_disjoint_ranges(self):
        rng = np.random.default_rng(80)
        gt = random_trajectory(rng, 5)
        est = Trajectory(gt.timestamps + 100.0, gt.poses)
        with pytest.raises(NoOverlap):
            associate(gt, est, 0.02)


class TestUmeyama:
    def test_se3_recovers_rotation(self):
        rng = np.random.default_rng(81)
        gt = random_trajectory(rng, 20)
        g = Pose(Rotation.exp([0, 0, np.deg2rad(30)]), [1.0, -2.0, 0.5])
        est_poses = [g @ p for p in gt.poses]
        pairs = align_umeyama(list(zip(gt.poses, est_poses)), "se3")
        rmse, _ = ate(pairs)
        assert rmse < 1e-9

    def test_sim3_recovers_scale(self):
        rng = np.random.default_rng(82)
        gt = random_trajectory(rng, 20)
        est_poses = [Pose(p.rotation, 2.0 * p.translation) for p in gt.poses]
        pairs = align_umeyama(list(zip(gt.poses, est_poses)), "sim3")
        rmse, _ = ate(pairs, variant="trans")
        assert rmse < 1e-9
        # se3 cannot absorb the scale
        pairs_se3 = align_umeyama(list(zip(gt.poses, est_poses)), "se3")
        rmse_se3, _ = ate(pairs_se3, variant="trans")
        assert rmse_se3 > 0.1

    def test_two_points_degenerate(self):
        rng = np.random.default_rng(83)
        gt = random_trajectory(rng, 2)
        with pytest.raises(DegenerateAlignment):
            align_umeyama(list(zip(gt.poses, gt.poses)), "se3")

    def test_collinear_degenerate(self):
        poses = [Pose(Rotation.identity(), [float(i), 0, 0]) for i in range(5)]
        with pytest.raises(DegenerateAlignment):
            align_umeyama(list(zip(poses, poses)), "se3")


class TestTrajectoryIo:
    def test_tum_roundtrip(self, tmp_path):
        rng = np.random.default_rng(84)
        traj = random_trajectory(rng, 12)
        path = tmp_path / "traj.txt"
        traj.save_tum(path)
        back = Trajectory.load_tum(path)
        assert len(back) == 12
        assert np.allclose(back.timestamps, traj.timestamps, atol=1e-9)
        for a, b in zip(traj.poses, back.poses):
            assert np.linalg.norm(a.translation - b.translation) < 1e-7
            assert a.rotation.angle_to(b.rotation) < 1e-7

    def test_euroc_gt_parsing(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text(
            "#timestamp,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n"
            "1000000000,1.0,2.0,3.0,1.0,0.0,0.0,0.0,0,0,0\n"
            "1050000000,1.1,2.0,3.0,0.0,0.0,0.0,1.0,0,0,0\n"
        )
        traj = Trajectory.load_euroc_csv(path)
        assert len(traj) == 2
        assert traj.timestamps[0] == pytest.approx(1.0)
        assert np.allclose(traj.poses[0].translation, [1, 2, 3])
        # w-first input: second row is a half turn about z
        assert traj.poses[1].rotation.angle_to(Rotation.exp([0, 0, np.pi])) < 1e-9

    def test_evaluate_report(self, tmp_path):
        rng = np.random.default_rng(85)
        gt = random_trajectory(rng, 10)
        est = Trajectory(gt.timestamps.copy(), gt.poses)
        report = evaluate(gt, est, metric="all", delta=1)
        assert report.ate_rmse == 0.0
        assert report.rpe_rmse == 0.0
        assert report.n == 10
        text = report.to_text()
        assert "ATE rmse" in text and "RPE rmse" in text
        out = tmp_path / "series.csv"
        report.save_series_csv(out)
        assert out.read_text().startswith("index,ate_error,rpe_error")
