"""Trajectory smoothing and occlusion gap filling with a linear-kernel RBF.

Each world coordinate of a track's pelvis is approximated over time by

    f(t) = sum_i w_i * |t - t_i| + slope * t + intercept

with the weights constrained to be orthogonal to the (1, t) polynomial
basis.  The smoothing parameter trades exactness at the samples for a
smoother curve: 0 interpolates exactly, very large values converge to
the ordinary least-squares line.  Resampling the fit at every integer
frame of the track's observed span fills occlusion gaps.

The coefficients solve the symmetric saddle system

    [ K - lam*I   P ] [w]   [y]
    [    P^T      0 ] [c] = [0],    K_ij = |t_i - t_j|,  P = (1, t).

|r| is conditionally negative definite, so subtracting lam on the kernel
diagonal is the penalty direction that keeps the system nonsingular for
every lam >= 0 (it matches the conventional formulation with kernel -|r|
and +lam).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .model import Skeleton, Track, TrackSample, TrackSet

log = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class RbfModel:
    """Fitted 1D approximator: kernel weights plus a linear tail."""

    centers: np.ndarray  # (n,) sample times, seconds
    weights: np.ndarray  # (n,)
    poly: tuple[float, float]  # (slope, intercept)
    smoothing: float

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centers, dtype=np.float64).ravel())
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64).ravel())
        if c.shape != w.shape:
            raise ValueError("centers and weights must have the same length")
        c.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "poly", (float(self.poly[0]), float(self.poly[1])))

    def __call__(self, t) -> np.ndarray:
        return rbf_eval(self, t)


def _solve_system(times: np.ndarray, rhs: np.ndarray, smoothing: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve the augmented system for one or more right-hand sides."""
    n = times.size
    a = np.zeros((n + 2, n + 2))
    a[:n, :n] = np.abs(times[:, None] - times[None, :])
    a[:n, :n] -= smoothing * np.eye(n)
    p = np.stack([np.ones(n), times], axis=1)
    a[:n, n:] = p
    a[n:, :n] = p.T
    b = np.zeros((n + 2,) + rhs.shape[1:])
    b[:n] = rhs
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise NumericalError(
            f"singular smoothing system (n={n}, lambda={smoothing:g}, "
            f"cond={np.linalg.cond(a):.3e})"
        ) from e
    weights, coeffs = sol[:n], sol[n:]
    scale = max(1.0, float(np.max(np.abs(rhs)))) * max(1.0, float(np.max(np.abs(times))))
    ortho = np.max(np.abs(p.T @ weights))
    if not np.isfinite(ortho) or ortho > ORTHOGONALITY_TOL * scale:
        raise NumericalError(
            f"untrustworthy smoothing solve (n={n}, lambda={smoothing:g}, "
            f"orthogonality residual {ortho:.3e}, cond={np.linalg.cond(a):.3e})"
        )
    return weights, coeffs


def rbf_fit(times, values, smoothing: float = 0.0) -> RbfModel:
    """Fit the approximator to scattered samples.

    ``smoothing`` = 0 reproduces the samples exactly; larger values
    deviate from them toward the least-squares line.
    """
    t = np.asarray(times, dtype=np.float64).ravel()
    y = np.asarray(values, dtype=np.float64).ravel()
    if t.size != y.size:
        raise InputError("times and values must have the same length")
    if t.size < 2:
        raise InputError("need at least 2 samples")
    if np.unique(t).size != t.size:
        raise InputError("duplicate sample times")
    if smoothing < 0:
        raise InputError("smoothing must be nonnegative")
    weights, coeffs = _solve_system(t, y, float(smoothing))
    return RbfModel(
        centers=t,
        weights=weights,
        poly=(float(coeffs[1]), float(coeffs[0])),
        smoothing=float(smoothing),
    )


def rbf_eval(model: RbfModel, t) -> np.ndarray:
    """Evaluate sum_i w_i |t - t_i| + slope*t + intercept at scalar or array t."""
    t_arr = np.asarray(t, dtype=np.float64)
    kernel = np.abs(np.atleast_1d(t_arr)[:, None] - model.centers[None, :]) @ model.weights
    slope, intercept = model.poly
    out = kernel + slope * np.atleast_1d(t_arr) + intercept
    return float(out[0]) if t_arr.ndim == 0 else out


def _fit_columns(times: np.ndarray, columns: np.ndarray, smoothing: float) -> list[RbfModel]:
    """One factorization, many right-hand sides (columns of shape (n, m))."""
    weights, coeffs = _solve_system(times, columns, smoothing)
    return [
        RbfModel(
            centers=times,
            weights=weights[:, k],
            poly=(float(coeffs[1, k]), float(coeffs[0, k])),
            smoothing=smoothing,
        )
        for k in range(columns.shape[1])
    ]


def smooth_tracks(ts: TrackSet, smoothing: float, smooth_all_joints: bool = False) -> TrackSet:
    """Smooth pelvis trajectories and resample at every frame of each track's span.

    Missing frames inside the span are filled, which is what repairs
    occlusion gaps; nothing is invented outside the observed span.
    Non-pelvis joints either get their own per-coordinate fits
    (``smooth_all_joints``) or ride along as pelvis-relative offsets
    copied from the nearest observed frame.  Discarded (-1) tracks and
    tracks with fewer than 2 samples pass through untouched.
    """
    layout = ts.layout
    pelvis_index = layout.pelvis_index
    out = []
    for track in ts.tracks:
        if track.id == -1:
            out.append(track)
            continue
        if len(track.samples) < 2:
            log.warning("track %d has %d sample(s); skipping smoothing", track.id, len(track.samples))
            out.append(track)
            continue

        obs_frames = np.array([s.frame for s in track.samples], dtype=int)
        times = obs_frames / ts.fps
        target_frames = np.arange(track.first_frame, track.last_frame + 1)
        target_times = target_frames / ts.fps

        if smooth_all_joints:
            joints_obs = np.stack([s.skeleton.joints3d for s in track.samples])  # (n, J, 3)
            n, j = joints_obs.shape[0], joints_obs.shape[1]
            models = _fit_columns(times, joints_obs.reshape(n, j * 3), smoothing)
            fitted = np.stack([rbf_eval(m, target_times) for m in models], axis=1)
            joints_new = fitted.reshape(len(target_frames), j, 3)
            pelvis_new = joints_new[:, pelvis_index, :]
        else:
            pelvis_obs = np.stack([s.world_pelvis for s in track.samples])  # (n, 3)
            models = _fit_columns(times, pelvis_obs, smoothing)
            pelvis_new = np.stack([rbf_eval(m, target_times) for m in models], axis=1)

        # nearest observed sample for carried-over joints offsets and 2D points
        nearest = np.searchsorted(obs_frames, target_frames)
        nearest = np.clip(nearest, 0, len(obs_frames) - 1)
        left = np.clip(nearest - 1, 0, len(obs_frames) - 1)
        pick_left = np.abs(target_frames - obs_frames[left]) <= np.abs(
            obs_frames[nearest] - target_frames
        )
        nearest = np.where(pick_left, left, nearest)

        samples = []
        for pos, frame in enumerate(target_frames):
            ref = track.samples[int(nearest[pos])]
            if smooth_all_joints:
                joints = joints_new[pos]
            else:
                offsets = ref.skeleton.joints3d - ref.world_pelvis
                joints = pelvis_new[pos] + offsets
            samples.append(
                TrackSample(
                    frame=int(frame),
                    skeleton=Skeleton(joints, ref.skeleton.joints2d),
                    world_pelvis=joints[pelvis_index] if smooth_all_joints else pelvis_new[pos],
                    det_index=None,
                )
            )
        out.append(Track(id=track.id, samples=tuple(samples), provenance="smoothed"))
    return TrackSet(fps=ts.fps, layout=layout, tracks=tuple(out))
