import os

import numpy as np
import pytest

from rangeloc.geometry import (ConditionSpec, PointCloudMap, Pose, Trajectory,
                               apply_condition, generate_paired_dataset,
                               load_dataset, load_png, load_point_cloud,
                               load_range_image, load_trajectory_tum,
                               project_points_to_range, render_equirect,
                               save_dataset, save_png, save_point_cloud,
                               save_range_image, save_trajectory_tum,
                               splat_values, synthesize_world,
                               yaw_shift_equirect)

IDENTITY_POSE = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]))


def make_cloud(points, albedo=None):
    points = np.asarray(points, dtype=np.float64)
    if albedo is None:
        albedo = np.full(len(points), 0.5)
    lo = points.min(axis=0) - 1
    hi = points.max(axis=0) + 1
    return PointCloudMap(points, albedo, np.array([lo, hi]))


def brute_force_projection(points, pose, h, w, r_max):
    """Independent per-point loop computing the per-pixel minimum range."""
    grid = np.full((h, w), 1.0)
    r_mat = pose.rotation_matrix()
    for p in points:
        local = r_mat.T @ (np.asarray(p) - pose.position)
        r = np.sqrt(local[0] ** 2 + local[1] ** 2 + local[2] ** 2)
        if r <= 1e-12 or r > r_max:
            continue
        theta = np.arccos(np.clip(local[2] / r, -1.0, 1.0))
        phi = np.arctan2(local[1], local[0]) % (2 * np.pi)
        row = min(int(theta * h / np.pi), h - 1)
        col = int(phi * w / (2 * np.pi)) % w
        grid[row, col] = min(grid[row, col], r / r_max)
    return grid


class TestProjection:
    def test_single_axis_aligned_point(self):
        cloud = make_cloud([[10.0, 0.0, 0.0]])
        img = project_points_to_range(cloud, IDENTITY_POSE, 64, 64, 30.0)
        assert img[32, 0] == pytest.approx(10.0 / 30.0, abs=1e-12)
        mask = np.ones((64, 64), dtype=bool)
        mask[32, 0] = False
        assert np.all(img[mask] == 1.0)

    def test_point_beyond_radius_is_sentinel(self):
        cloud = make_cloud([[31.0, 0.0, 0.0]])
        img = project_points_to_range(cloud, IDENTITY_POSE, 64, 64, 30.0)
        assert np.all(img == 1.0)

    def test_matches_per_point_loop_exactly(self):
        rng = np.random.default_rng(3)
        points = rng.uniform(-25, 25, size=(1000, 3))
        cloud = make_cloud(points)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        pose = Pose(rng.uniform(-5, 5, size=3), q)
        fast = project_points_to_range(cloud, pose, 64, 64, 30.0)
        slow = brute_force_projection(points, pose, 64, 64, 30.0)
        assert np.array_equal(fast, slow)

    def test_empty_and_nonfinite_errors(self):
        with pytest.raises(ValueError, match="empty map"):
            PointCloudMap(np.zeros((0, 3)), np.zeros(0), np.zeros((2, 3)))
        cloud = make_cloud([[1.0, 0, 0]])
        cloud.points[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            project_points_to_range(cloud, IDENTITY_POSE, 8, 8, 30.0)


class TestYawShift:
    def test_zero_angle_identity(self):
        img = np.random.default_rng(0).random((64, 64, 3))
        assert np.array_equal(yaw_shift_equirect(img, 0.0), img)

    def test_ninety_degrees_is_16_column_roll(self):
        img = np.random.default_rng(1).random((64, 64, 3))
        assert np.array_equal(yaw_shift_equirect(img, 90.0), np.roll(img, 16, axis=1))

    def test_full_cycle_of_grid_shifts_is_identity(self):
        img = np.random.default_rng(2).random((32, 64))
        out = img
        for _ in range(64):
            out = yaw_shift_equirect(out, 360.0 / 64)
        assert np.array_equal(out, img)

    def test_resample_round_trip_on_smooth_image(self):
        # band-limited azimuthal content keeps linear resampling accurate
        cols = np.arange(64) / 64 * 2 * np.pi
        img = 0.5 + 0.3 * np.sin(cols)[None, :, None] * np.ones((64, 1, 3))
        back = yaw_shift_equirect(yaw_shift_equirect(img, 45.0), -45.0)
        assert np.abs(back - img).max() <= 1e-3

    def test_non_finite_angle_rejected(self):
        with pytest.raises(ValueError):
            yaw_shift_equirect(np.zeros((8, 8, 3)), np.nan)


class TestConditions:
    def test_identity_spec_returns_equal_image(self):
        img = np.random.default_rng(5).random((64, 64, 3))
        out = apply_condition(img, ConditionSpec())
        assert np.array_equal(out, img)

    def test_zero_brightness_blacks_out(self):
        img = np.random.default_rng(6).random((64, 64, 3))
        out = apply_condition(img, ConditionSpec(brightness=0.0))
        assert np.all(out == 0.0)

    def test_noise_is_seed_deterministic(self):
        img = np.random.default_rng(7).random((64, 64, 3))
        cond = ConditionSpec(noise_sigma=0.1, seed=7)
        a = apply_condition(img, cond)
        b = apply_condition(img, cond)
        assert np.array_equal(a, b)
        c = apply_condition(img, ConditionSpec(noise_sigma=0.1, seed=8))
        assert not np.array_equal(a, c)

    def test_output_clipped(self):
        img = np.full((8, 8, 3), 0.9)
        out = apply_condition(img, ConditionSpec(brightness=2.0))
        assert out.max() <= 1.0

    @pytest.mark.parametrize("field", ["brightness", "noise_sigma", "fog_density"])
    def test_negative_parameters_rejected(self, field):
        with pytest.raises(ValueError):
            ConditionSpec(**{field: -0.1})


class TestWorld:
    def test_same_seed_bit_identical(self, small_world):
        cloud, traj = small_world
        cloud2, traj2 = synthesize_world(seed=11, extent=60, n_primitives=20,
                                         n_poses=80)
        assert np.array_equal(cloud.points, cloud2.points)
        assert np.array_equal(cloud.albedo, cloud2.albedo)
        assert np.array_equal(traj.positions(), traj2.positions())

    def test_points_inside_extent(self):
        cloud, _ = synthesize_world(seed=2, extent=100, n_primitives=50, n_poses=60)
        assert np.all(np.abs(cloud.points[:, :2]) <= 50.0 + 1e-9)

    def test_trajectory_respects_max_step(self, small_world):
        _, traj = small_world
        steps = np.linalg.norm(np.diff(traj.positions(), axis=0), axis=1)
        assert steps.max() <= 2.0

    def test_infeasible_extent_rejected(self):
        with pytest.raises(ValueError, match="infeasible trajectory"):
            synthesize_world(seed=0, extent=10, n_primitives=0)

    def test_ground_plane_matches_analytic_range(self):
        cloud, traj = synthesize_world(seed=4, extent=36, n_primitives=0,
                                       n_poses=50, ground_pitch=0.12)
        pose = traj[0]
        h_img = 64
        img = project_points_to_range(cloud, pose, h_img, h_img, 30.0)
        height = pose.position[2]
        rot = pose.rotation_matrix()
        # upper hemisphere: no ground return
        assert np.all(img[: h_img // 2] == 1.0)
        checked = 0
        for row in range(h_img // 2, h_img):
            th0 = row * np.pi / h_img
            th1 = th0 + np.pi / h_img
            if np.cos(th0) > -1e-9:
                continue
            r0 = -height / np.cos(th0)
            r1 = -height / np.cos(th1)
            # need an annulus wide enough to guarantee grid samples in each bin
            rho0 = np.sqrt(max(r0**2 - height**2, 0.0))
            rho1 = np.sqrt(max(r1**2 - height**2, 0.0))
            if rho0 - rho1 < 0.3 or r1 > 29.0:
                continue
            quant = r0 - r1
            thc = (th0 + th1) / 2
            center = -height / np.cos(thc)
            for col in range(h_img):
                phc = (col + 0.5) * 2 * np.pi / h_img
                direction = rot @ np.array([
                    np.sin(thc) * np.cos(phc), np.sin(thc) * np.sin(phc), np.cos(thc)
                ])
                hit = pose.position + r0 * direction
                # only bins whose ground footprint lies inside the finite world
                if np.any(np.abs(hit[:2]) > 18.0 - 0.5):
                    continue
                checked += 1
                assert abs(img[row, col] * 30.0 - center) <= quant + 1e-9, \
                    f"row {row} col {col}"
        assert checked > 300


class TestPairedDataset:
    @pytest.fixture(scope="class")
    def dataset(self):
        cloud, traj = synthesize_world(seed=9, extent=50, n_primitives=15,
                                       n_poses=40)
        traj = Trajectory(traj.poses[:10], max_step=traj.max_step)
        conds = [ConditionSpec(label=0),
                 ConditionSpec(label=1, brightness=0.5, seed=1),
                 ConditionSpec(label=2, hue_shift=30.0, noise_sigma=0.02, seed=2)]
        return cloud, traj, generate_paired_dataset(cloud, traj, conds)

    def test_counts_and_alignment(self, dataset):
        _, traj, ds = dataset
        assert len(ds) == 10 * 3
        for pi in range(10):
            group = [s for s in ds.samples if s.pose_index == pi]
            assert [s.condition_label for s in group] == [0, 1, 2]
            assert np.array_equal(group[0].range_image, group[1].range_image)
            assert np.array_equal(group[0].range_image, group[2].range_image)

    def test_render_projection_consistency(self, dataset):
        cloud, traj, ds = dataset
        pose = traj[0]
        proj = project_points_to_range(cloud, pose, 64, 64, 30.0)
        ranges = np.linalg.norm(pose.world_to_local(cloud.points), axis=1)
        splat, mask = splat_values(cloud, pose, 64, 64, 30.0,
                                   np.minimum(ranges, 30.0) / 30.0)
        assert np.array_equal(splat[mask], proj[mask])
        assert np.all(proj[~mask] == 1.0)

    def test_save_is_byte_deterministic(self, dataset, tmp_path):
        cloud, traj, ds = dataset
        d1, d2 = tmp_path / "a", tmp_path / "b"
        save_dataset(d1, cloud, traj, ds)
        save_dataset(d2, cloud, traj, ds)
        files1 = sorted(p.relative_to(d1) for p in d1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(d2) for p in d2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (d1 / rel).read_bytes() == (d2 / rel).read_bytes()

    def test_load_round_trip(self, dataset, tmp_path):
        cloud, traj, ds = dataset
        save_dataset(tmp_path / "d", cloud, traj, ds)
        back = load_dataset(tmp_path / "d")
        assert len(back) == len(ds)
        # ranges are exact; images go through 8-bit PNG quantization
        assert np.array_equal(
            back.samples[0].range_image.astype(np.float32),
            ds.samples[0].range_image.astype(np.float32),
        )
        assert np.abs(back.samples[5].image - ds.samples[5].image).max() <= 0.5 / 255


class TestFileFormats:
    def test_point_cloud_round_trip(self, tmp_path, small_world):
        cloud, _ = small_world
        path = tmp_path / "m.i3dpc"
        save_point_cloud(path, cloud)
        with open(path, "rb") as f:
            assert f.read(6) == b"I3DPC1"
        back = load_point_cloud(path)
        assert np.array_equal(back.points, cloud.points.astype(np.float32))
        assert np.array_equal(back.albedo, cloud.albedo.astype(np.float32))

    def test_range_image_round_trip(self, tmp_path):
        img = np.random.default_rng(0).random((64, 64)).astype(np.float32)
        path = tmp_path / "r.i3drg"
        save_range_image(path, img)
        with open(path, "rb") as f:
            assert f.read(6) == b"I3DRG1"
        assert np.array_equal(load_range_image(path), img)

    def test_png_round_trip_8bit(self, tmp_path):
        img = np.random.default_rng(1).random((64, 64, 3))
        path = tmp_path / "i.png"
        save_png(path, img)
        back = load_png(path)
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12

    def test_tum_round_trip(self, tmp_path, small_world):
        _, traj = small_world
        path = tmp_path / "t.tum"
        save_trajectory_tum(path, traj)
        first = open(path).readline().split()
        assert len(first) == 8
        back = load_trajectory_tum(path)
        assert len(back) == len(traj)
        assert np.allclose(back.positions(), traj.positions(), atol=1e-6)
        q0 = back.poses[3].orientation
        assert np.allclose(q0, traj.poses[3].orientation, atol=1e-6) or \
            np.allclose(-q0, traj.poses[3].orientation, atol=1e-6)


class TestPoseTypes:
    def test_quaternion_norm_invariant(self):
        with pytest.raises(ValueError, match="norm"):
            Pose(np.zeros(3), np.array([1.0, 0, 0, 1e-3]))

    def test_timestamps_strictly_increase(self):
        p1 = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]), timestamp=0.0)
        p2 = Pose(np.ones(3) * 0.1, np.array([1.0, 0, 0, 0]), timestamp=0.0)
        with pytest.raises(ValueError, match="strictly increase"):
            Trajectory([p1, p2])
