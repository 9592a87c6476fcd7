import numpy as np
import pytest

from stagetracks import synth
from stagetracks.errors import GeometryError
from stagetracks.geom import (
    CameraExtrinsics,
    GroundLine,
    PerFrameMotion,
    camera_pitch,
    canonical_camera,
    extrinsics_from_ground,
    fit_ground_line,
    rot_x,
    rot_z,
    to_world,
)
from stagetracks.io import PointCloud
from stagetracks.model import JointLayout, Track, TrackSample, TrackSet

from conftest import make_skeleton


def plane_cloud(slope, intercept, n=600, z_range=(1.0, 9.0), seed=0, clutter_frac=0.0):
    """Exact plane y = slope*z + intercept (y-down), optional clutter above ground.

    Ground side is +y for y-down clouds, so "above the stage" means smaller y.
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(*z_range, n)
    x = rng.uniform(-3, 3, n)
    y = slope * z + intercept
    n_clutter = int(n * clutter_frac)
    if n_clutter:
        y = y.copy()
        y[:n_clutter] -= rng.uniform(0.1, 1.8, n_clutter)  # bodies above the stage
    return PointCloud(np.stack([x, y, z], axis=1), convention="y-down")


class TestFitGroundLine:
    def test_exact_plane(self):
        cloud = plane_cloud(0.1, -1.5)
        line = fit_ground_line(cloud, q=0.05, bins=50, iterations=3)
        assert line.slope == pytest.approx(0.1, abs=1e-6)
        assert line.intercept == pytest.approx(-1.5, abs=1e-6)

    def test_plane_with_30pct_clutter(self):
        cloud = plane_cloud(0.1, -1.5, n=2000, clutter_frac=0.30, seed=1)
        line = fit_ground_line(cloud, q=0.05, bins=50, iterations=3)
        assert line.slope == pytest.approx(0.1, abs=1e-3)
        assert line.intercept == pytest.approx(-1.5, abs=1e-3)

    def test_horizontal_plane(self):
        cloud = plane_cloud(0.0, -1.2, seed=2)
        line = fit_ground_line(cloud)
        assert line.slope == pytest.approx(0.0, abs=1e-9)
        assert line.intercept == pytest.approx(-1.2, abs=1e-9)

    def test_single_depth_degenerate(self):
        pts = np.column_stack([np.linspace(-1, 1, 60), np.linspace(0, 1, 60), np.full(60, 5.0)])
        with pytest.raises(GeometryError):
            fit_ground_line(PointCloud(pts))

    def test_inliers_are_ground_points(self):
        cloud = plane_cloud(0.05, 2.0, n=1000, clutter_frac=0.3, seed=3)
        line = fit_ground_line(cloud)
        resid = cloud.points[list(line.inlier_indices), 1] - (
            line.slope * cloud.points[list(line.inlier_indices), 2] + line.intercept
        )
        assert np.max(np.abs(resid)) < 1e-9

    def test_rigid_transform_equivariance(self):
        # rotating the cloud in the (z, y) plane, fitting, and mapping the
        # line back recovers the original line (exact-plane data)
        base = plane_cloud(0.08, 1.4, n=800, clutter_frac=0.2, seed=4)
        line0 = fit_ground_line(base)
        for angle in (-0.15, 0.1, 0.25):
            c, s = np.cos(angle), np.sin(angle)
            pts = base.points.copy()
            z, y = pts[:, 2].copy(), pts[:, 1].copy()
            pts[:, 2] = c * z - s * y + 0.7
            pts[:, 1] = s * z + c * y - 0.3
            line1 = fit_ground_line(PointCloud(pts, convention="y-down"))
            # map two points of the fitted line back and re-derive slope/intercept
            z1 = np.array([2.0, 8.0])
            y1 = line1.slope * z1 + line1.intercept
            zb = c * (z1 - 0.7) + s * (y1 + 0.3)
            yb = -s * (z1 - 0.7) + c * (y1 + 0.3)
            slope_back = (yb[1] - yb[0]) / (zb[1] - zb[0])
            intercept_back = yb[0] - slope_back * zb[0]
            assert slope_back == pytest.approx(line0.slope, abs=1e-6)
            assert intercept_back == pytest.approx(line0.intercept, abs=1e-6)


class TestExtrinsicsFromGround:
    def test_flat_line_flips_up_axis(self):
        ext = extrinsics_from_ground(GroundLine(0.0, -1.5, (0,)))
        tilt = rot_z(np.pi).T @ ext.rotation
        assert np.allclose(tilt, np.eye(3), atol=1e-12)  # no tilt component
        assert abs(ext.translation[1]) == pytest.approx(1.5, abs=1e-12)
        # up-axis flip: camera +y (down) maps to world -y
        assert ext.rotation[1, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_line_through_origin(self):
        ext = extrinsics_from_ground(GroundLine(0.0, 0.0, (0,)))
        assert ext.translation[1] == pytest.approx(0.0, abs=1e-12)

    def test_slope_rotation_angle(self):
        ext = extrinsics_from_ground(GroundLine(0.1, 1.0, (0,)))
        angle = abs(camera_pitch(ext))
        assert angle == pytest.approx(np.arctan(0.1), abs=1e-9)
        assert np.degrees(angle) == pytest.approx(5.710593137499643, abs=1e-9)

    def test_maps_ground_to_zero_height(self):
        cloud = plane_cloud(-0.12, 1.51, seed=5)
        line = fit_ground_line(cloud)
        ext = extrinsics_from_ground(line)
        world = ext.apply(cloud.points)
        assert np.max(np.abs(world[:, 1])) < 1e-9
        # ground normal is world +y: points above stage get positive y
        above = cloud.points.copy()
        above[:, 1] -= 0.5  # toward the camera, away from ground (y-down)
        assert np.all(ext.apply(above)[:, 1] > 0)

    def test_round_trip_with_canonical_camera(self):
        cam = canonical_camera(height=1.5, pitch=0.12)
        world = np.stack(
            [np.random.default_rng(6).uniform(-3, 3, 500), np.zeros(500), np.linspace(2, 9, 500)],
            axis=1,
        )
        cloud = PointCloud(cam.inverse().apply(world), convention="y-down")
        line = fit_ground_line(cloud)
        ext = extrinsics_from_ground(line)
        assert np.allclose(ext.rotation, cam.rotation, atol=1e-12)
        assert np.allclose(ext.translation, cam.translation, atol=1e-12)

    def test_y_up_convention_round_trip(self):
        cam = canonical_camera(height=2.0, pitch=0.2, convention="y-up")
        rng = np.random.default_rng(7)
        world = np.stack([rng.uniform(-3, 3, 400), np.zeros(400), np.linspace(2, 9, 400)], axis=1)
        cloud = PointCloud(cam.inverse().apply(world), convention="y-up")
        line = fit_ground_line(cloud)
        ext = extrinsics_from_ground(line, convention="y-up")
        assert np.allclose(ext.rotation, cam.rotation, atol=1e-12)
        assert np.allclose(ext.translation, cam.translation, atol=1e-12)


def single_track_set(positions, layout=None, fps=30.0):
    layout = layout or JointLayout(joint_count=3, pelvis_index=0, head_index=1)
    samples = tuple(
        TrackSample(frame=k, skeleton=make_skeleton(p, layout), world_pelvis=p)
        for k, p in enumerate(positions)
    )
    return TrackSet(fps=fps, layout=layout, tracks=(Track(id=0, samples=samples),))


class TestToWorld:
    def test_identity_is_noop(self):
        ts = single_track_set([(0, 0, 2), (0.1, 0, 2)])
        out = to_world(ts, CameraExtrinsics.identity())
        assert out == ts

    def test_pure_translation(self):
        ts = single_track_set([(0, 0, 2), (0.1, 0, 2)])
        ext = CameraExtrinsics(np.eye(3), np.array([1.0, 0, 0]))
        out = to_world(ts, ext)
        for before, after in zip(ts.tracks[0].samples, out.tracks[0].samples):
            assert np.allclose(after.world_pelvis, before.world_pelvis + [1, 0, 0])
            assert np.array_equal(after.skeleton.joints2d, before.skeleton.joints2d)

    def test_rigid_transform_preserves_joint_distances(self):
        rng = np.random.default_rng(8)
        ts = single_track_set(rng.uniform(-2, 2, (5, 3)))
        ext = CameraExtrinsics(rot_z(np.pi) @ rot_x(0.3), np.array([0.3, 1.5, -0.2]))
        out = to_world(ts, ext)
        for before, after in zip(ts.tracks[0].samples, out.tracks[0].samples):
            d0 = np.linalg.norm(
                before.skeleton.joints3d[:, None] - before.skeleton.joints3d[None], axis=2
            )
            d1 = np.linalg.norm(
                after.skeleton.joints3d[:, None] - after.skeleton.joints3d[None], axis=2
            )
            assert np.max(np.abs(d0 - d1)) < 1e-9

    def test_per_frame_motion_and_camera_orbit_closure(self):
        # the generator makes camera-space data from world truth with a
        # panning camera; applying base + per-frame motion must return truth
        spec = synth.ScenarioSpec(
            dancer_count=2, duration_s=1.0, fps=50.0, camera_pan_amplitude=0.5, seed=10
        )
        truth, seq, _, cloud = synth.generate(spec)
        from stagetracks.track import build_tracks

        ts = build_tracks(seq, 0.5)
        base = extrinsics_from_ground(fit_ground_line(cloud))
        motion = synth.camera_motion_table(spec)
        world = to_world(ts, base, motion)
        for track in world.tracks:
            ref = truth.tracks[track.id]
            for s, r in zip(track.samples, ref.samples):
                assert np.allclose(s.world_pelvis, r.world_pelvis, atol=1e-6)
                assert np.allclose(s.skeleton.joints3d, r.skeleton.joints3d, atol=1e-6)

    def test_ground_pipeline_inlier_mean_height(self):
        cloud = plane_cloud(0.07, 1.6, n=1500, clutter_frac=0.3, seed=11)
        line = fit_ground_line(cloud)
        ext = extrinsics_from_ground(line)
        inliers = ext.apply(cloud.points[list(line.inlier_indices)])
        assert abs(np.mean(inliers[:, 1])) < 1e-6


class TestPerFrameMotion:
    def test_identity_default(self):
        motion = PerFrameMotion({0: CameraExtrinsics(np.eye(3), np.array([1.0, 0, 0]))})
        assert motion.at(0).translation[0] == 1.0
        assert motion.at(5) == CameraExtrinsics.identity()


class TestCameraExtrinsics:
    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError):
            CameraExtrinsics(np.eye(3) * 1.1, np.zeros(3))
        with pytest.raises(ValueError):  # reflection: det -1
            CameraExtrinsics(np.diag([1.0, -1.0, 1.0]), np.zeros(3))

    def test_compose_inverse(self):
        a = canonical_camera(1.5, 0.1)
        b = CameraExtrinsics(rot_x(0.2), np.array([0.1, 0.2, 0.3]))
        p = np.array([0.5, -0.2, 4.0])
        assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)))
        assert np.allclose(a.inverse().apply(a.apply(p)), p, atol=1e-12)
