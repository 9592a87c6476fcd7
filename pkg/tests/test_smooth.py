import numpy as np
import pytest
import scipy.linalg
from scipy.interpolate import RBFInterpolator

from stagetracks import synth
from stagetracks.errors import InputError
from stagetracks.geom import extrinsics_from_ground, fit_ground_line, to_world
from stagetracks.model import JointLayout, Track, TrackSample, TrackSet
from stagetracks.smooth import RbfModel, rbf_eval, rbf_fit, smooth_tracks
from stagetracks.track import build_tracks

from conftest import make_skeleton


def dense_reference_fit(times, values, lam):
    """Independent dense assembly and solve of the same saddle system."""
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    n = t.size
    a = np.zeros((n + 2, n + 2))
    for i in range(n):
        for j in range(n):
            a[i, j] = abs(t[i] - t[j])
        a[i, i] -= lam
        a[i, n] = a[n, i] = 1.0
        a[i, n + 1] = a[n + 1, i] = t[i]
    sol = scipy.linalg.solve(a, np.concatenate([y, [0.0, 0.0]]))
    return sol[:n], (sol[n + 1], sol[n])  # weights, (slope, intercept)


class TestRbfFit:
    def test_reproduces_linear_polynomial(self):
        model = rbf_fit([0.0, 1.0, 2.0], [1.0, 3.0, 5.0], 0.0)  # y = 2t + 1
        assert rbf_eval(model, 1.5) == pytest.approx(4.0, abs=1e-9)

    def test_two_point_interpolation(self):
        model = rbf_fit([0.0, 1.0], [0.0, 1.0], 0.0)
        assert rbf_eval(model, 0.5) == pytest.approx(0.5, abs=1e-12)
        assert rbf_eval(model, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_noisy_parabola_against_dense_reference(self):
        rng = np.random.default_rng(0)
        t = np.sort(rng.uniform(0, 5, 25))
        y = 0.3 * t**2 - t + rng.normal(0, 0.1, t.size)
        model = rbf_fit(t, y, 0.0)
        # exact interpolation at the samples
        assert np.max(np.abs(rbf_eval(model, t) - y)) < 1e-9
        # independent dense solve agrees coefficient by coefficient
        w_ref, poly_ref = dense_reference_fit(t, y, 0.0)
        assert np.allclose(model.weights, w_ref, atol=1e-9)
        assert np.allclose(model.poly, poly_ref, atol=1e-9)

    def test_smoothing_matches_scipy_convention(self):
        # the conventional formulation (kernel -r, +lambda) is the oracle
        rng = np.random.default_rng(1)
        t = np.sort(rng.uniform(0, 6, 80))
        y = np.sin(t) + rng.normal(0, 0.05, t.size)
        for lam in (1e-3, 1e-2, 0.5):
            model = rbf_fit(t, y, lam)
            ref = RBFInterpolator(t[:, None], y, kernel="linear", degree=1, smoothing=lam)
            assert np.max(np.abs(rbf_eval(model, t) - ref(t[:, None]))) < 1e-9

    def test_orthogonality_invariant(self):
        rng = np.random.default_rng(2)
        t = np.sort(rng.uniform(0, 10, 60))
        y = rng.normal(0, 1, t.size)
        for lam in (0.0, 1e-3, 10.0, 1e8):
            model = rbf_fit(t, y, lam)
            p = np.stack([np.ones(t.size), t], axis=1)
            assert np.max(np.abs(p.T @ model.weights)) < 1e-8

    def test_huge_lambda_converges_to_least_squares_line(self):
        rng = np.random.default_rng(3)
        t = np.linspace(0, 4, 120)
        y = 1.5 * t - 2 + rng.normal(0, 0.3, t.size)
        model = rbf_fit(t, y, 1e8)
        slope, intercept = np.polyfit(t, y, 1)
        ols = slope * t + intercept
        assert np.max(np.abs(rbf_eval(model, t) - ols)) < 1e-4

    def test_duplicate_times_rejected(self):
        with pytest.raises(InputError):
            rbf_fit([0.0, 0.0, 1.0], [1.0, 2.0, 3.0], 0.0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(InputError):
            rbf_fit([0.0], [1.0], 0.0)


class TestRbfEval:
    def test_zero_weights_pure_poly(self):
        model = RbfModel(centers=[0.0, 1.0], weights=[0.0, 0.0], poly=(2.0, 1.0), smoothing=0.0)
        assert rbf_eval(model, 3.0) == pytest.approx(7.0)

    def test_interpolates_endpoint(self):
        model = rbf_fit([0.0, 1.0], [0.0, 1.0], 0.0)
        assert rbf_eval(model, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_linear_extrapolation_asymptote(self):
        # beyond the last center the kernel sum vanishes (weights are
        # orthogonal to (1, t)), leaving exactly the polynomial tail
        rng = np.random.default_rng(4)
        t = np.sort(rng.uniform(0, 3, 30))
        y = np.cos(t)
        model = rbf_fit(t, y, 1e-2)
        slope, intercept = model.poly
        effective_slope = slope + model.weights.sum()
        assert effective_slope == pytest.approx(slope, abs=1e-10)
        for far in (1e3, 1e4):
            assert rbf_eval(model, far) == pytest.approx(slope * far + intercept, rel=1e-9)


def track_from_positions(frames, positions, fps=100.0):
    layout = JointLayout(joint_count=3, pelvis_index=0, head_index=1)
    samples = tuple(
        TrackSample(frame=int(f), skeleton=make_skeleton(p, layout), world_pelvis=p)
        for f, p in zip(frames, positions)
    )
    return TrackSet(fps=fps, layout=layout, tracks=(Track(id=0, samples=samples),))


class TestSmoothTracks:
    def test_gap_free_lambda_zero_is_identity(self):
        rng = np.random.default_rng(5)
        pos = np.cumsum(rng.normal(0, 0.01, (50, 3)), axis=0) + [0, 0.9, 4]
        ts = track_from_positions(range(50), pos)
        out = smooth_tracks(ts, 0.0)
        for before, after in zip(ts.tracks[0].samples, out.tracks[0].samples):
            assert np.allclose(after.world_pelvis, before.world_pelvis, atol=1e-6)
            assert np.allclose(after.skeleton.joints3d, before.skeleton.joints3d, atol=1e-6)

    def test_occlusion_gap_filled_on_constant_velocity_line(self):
        frames = [f for f in range(41) if not 15 <= f <= 25]
        velocity = np.array([0.02, 0.0, 0.01])
        pos = [np.array([0.0, 0.9, 4.0]) + velocity * f for f in frames]
        ts = track_from_positions(frames, pos)
        out = smooth_tracks(ts, 0.0)
        track = out.tracks[0]
        assert len(track.samples) == 41  # exactly (last - first + 1)
        for s in track.samples:
            expected = np.array([0.0, 0.9, 4.0]) + velocity * s.frame
            assert np.allclose(s.world_pelvis, expected, atol=1e-6)
            assert np.allclose(s.skeleton.joints3d[0], s.world_pelvis, atol=1e-9)

    def test_noisy_depth_rmse_improves(self):
        spec = synth.ScenarioSpec(
            dancer_count=2, duration_s=10.0, fps=50.0, sigma_depth=0.10, seed=11
        )
        truth, seq, _, cloud = synth.generate(spec)
        ts = build_tracks(seq, 0.44)
        world = to_world(ts, extrinsics_from_ground(fit_ground_line(cloud)))
        smoothed = smooth_tracks(world, 1e-3)
        truth_map = {
            t.id: {s.frame: s.world_pelvis for s in t.samples} for t in truth.tracks
        }

        def depth_rmse(result):
            errs = []
            for t in result.active_tracks():
                if len(t.samples) < 100:
                    continue  # stray fragments have no stable identity
                for s in t.samples:
                    ref = min(
                        truth_map.values(),
                        key=lambda m: np.linalg.norm(m[s.frame] - s.world_pelvis)
                        if s.frame in m
                        else np.inf,
                    )
                    if s.frame in ref:
                        errs.append((ref[s.frame][2] - s.world_pelvis[2]) ** 2)
            return np.sqrt(np.mean(errs))

        assert depth_rmse(smoothed) < depth_rmse(world)

    def test_double_smoothing_idempotent_at_zero(self):
        rng = np.random.default_rng(6)
        pos = np.cumsum(rng.normal(0, 0.01, (30, 3)), axis=0)
        ts = track_from_positions(range(30), pos)
        once = smooth_tracks(ts, 0.0)
        twice = smooth_tracks(once, 0.0)
        for a, b in zip(once.tracks[0].samples, twice.tracks[0].samples):
            assert np.allclose(a.world_pelvis, b.world_pelvis, atol=1e-6)

    def test_short_track_skipped_with_warning(self, caplog):
        ts = track_from_positions([3], [np.array([0, 0.9, 4.0])])
        with caplog.at_level("WARNING"):
            out = smooth_tracks(ts, 0.0)
        assert out.tracks[0] == ts.tracks[0]
        assert any("skipping" in r.message for r in caplog.records)

    def test_discarded_tracks_pass_through(self):
        layout = JointLayout(joint_count=3, pelvis_index=0, head_index=1)
        samples = tuple(
            TrackSample(frame=f, skeleton=make_skeleton((0, 0.9, 4)), world_pelvis=(0, 0.9, 4))
            for f in range(5)
        )
        ts = TrackSet(fps=30, layout=layout, tracks=(Track(id=-1, samples=samples),))
        out = smooth_tracks(ts, 0.0)
        assert out.tracks[0] == ts.tracks[0]

    def test_smooth_all_joints_mode(self):
        from stagetracks.model import Skeleton

        frames = [f for f in range(30) if f != 11]
        base = np.array([0.0, 0.9, 4.0])
        layout = JointLayout(joint_count=3, pelvis_index=0, head_index=1)
        samples = []
        for f in frames:
            pelvis = base + [0.01 * f, 0, 0.02 * f]
            joints = np.stack([pelvis, pelvis + [0, 0.3 + 0.001 * f, 0], pelvis + [0, 0.6, 0]])
            kp2d = np.zeros((3, 2))
            samples.append(
                TrackSample(frame=f, skeleton=Skeleton(joints, kp2d), world_pelvis=pelvis)
            )
        ts = TrackSet(fps=100, layout=layout, tracks=(Track(id=0, samples=tuple(samples)),))
        out = smooth_tracks(ts, 0.0, smooth_all_joints=True)
        track = out.tracks[0]
        assert len(track.samples) == 30
        # every joint coordinate gets its own exact interpolant, including
        # the head's slow drift, which offset-carrying would have frozen
        for s in track.samples:
            f = s.frame
            pelvis = base + [0.01 * f, 0, 0.02 * f]
            assert np.allclose(s.skeleton.joints3d[1], pelvis + [0, 0.3 + 0.001 * f, 0], atol=1e-6)
            assert np.allclose(s.skeleton.joints3d[0], s.world_pelvis, atol=1e-9)
