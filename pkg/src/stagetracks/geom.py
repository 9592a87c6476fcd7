"""Stage geometry: ground-line estimation and camera-to-world transforms.

The scene reconstruction gives a 3D point cloud in camera coordinates.
Projecting it onto the (z, y) plane shows the stage floor as a line; a
quantile-based robust fit recovers that line despite the performers'
bodies cluttering the space above it.  The fitted line determines the
camera tilt about its x-axis and its height over the stage, which is all
that is needed to place skeletons in a gravity-aligned world frame
(world +y up, ground at y = 0).  Roll cannot be observed from a single
projected line and is assumed zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeometryError
from .model import Track, TrackSample, TrackSet

CONVENTIONS = ("y-down", "y-up")


@dataclass(frozen=True)
class GroundLine:
    """Stage floor in the camera's (z, y) projection: y = slope * z + intercept."""

    slope: float
    intercept: float
    inlier_indices: tuple[int, ...]

    def __post_init__(self):
        if not (np.isfinite(self.slope) and np.isfinite(self.intercept)):
            raise ValueError("ground line parameters must be finite")
        if not self.inlier_indices:
            raise ValueError("ground line needs at least one inlier")
        object.__setattr__(self, "inlier_indices", tuple(int(i) for i in self.inlier_indices))


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """Rigid transform from camera to world coordinates: p_world = R p + t."""

    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraExtrinsics":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points into world coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "CameraExtrinsics":
        rt = self.rotation.T
        return CameraExtrinsics(rt, -rt @ self.translation)

    def compose(self, inner: "CameraExtrinsics") -> "CameraExtrinsics":
        """Transform applying ``inner`` first, then this one."""
        return CameraExtrinsics(
            self.rotation @ inner.rotation,
            self.rotation @ inner.translation + self.translation,
        )

    def __eq__(self, other):
        if not isinstance(other, CameraExtrinsics):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )


class PerFrameMotion:
    """Per-frame camera motion table; frames not listed are identity."""

    def __init__(self, table: Optional[dict[int, CameraExtrinsics]] = None):
        self._table = dict(table or {})
        self._identity = CameraExtrinsics.identity()

    def at(self, frame: int) -> CameraExtrinsics:
        return self._table.get(frame, self._identity)

    def frames(self) -> list[int]:
        return sorted(self._table)

    def items(self):
        return sorted(self._table.items())

    def __len__(self):
        return len(self._table)

    def __eq__(self, other):
        if not isinstance(other, PerFrameMotion):
            return NotImplemented
        return self._table == other._table


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def canonical_camera(height: float, pitch: float, convention: str = "y-down") -> CameraExtrinsics:
    """Camera at (0, height, 0) looking along world +z, pitched down by ``pitch``.

    This is the family of poses a single ground line can determine: tilt
    about the camera x-axis plus height over the stage.  A positive pitch
    aims the camera below the horizon.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    r = rot_z(np.pi) @ rot_x(-pitch)
    if convention == "y-up":
        # y-up cameras store points with y and z mirrored relative to y-down.
        r = r @ rot_x(np.pi)
    return CameraExtrinsics(r, np.array([0.0, float(height), 0.0]))


def camera_pitch(ext: CameraExtrinsics) -> float:
    """Downward pitch angle of a canonical y-down camera."""
    tilt = rot_z(np.pi).T @ ext.rotation
    return float(np.arctan2(-tilt[2, 1], tilt[1, 1]))


def fit_ground_line(
    cloud,
    q: float = 0.05,
    bins: int = 50,
    iterations: int = 3,
) -> GroundLine:
    """Fit the stage floor line to a camera-space point cloud.

    Points are projected to (z, y).  The z-range is split into ``bins``
    equal bins and each nonempty bin contributes its q-quantile point
    counted from the ground side (the largest y for y-down clouds, the
    smallest for y-up).  A least-squares line goes through the selected
    points; every further iteration reselects the points lying within one
    residual standard deviation of the current line and refits, which
    sheds any body clutter the quantile pick let through.
    """
    if not 0 < q < 1:
        raise ValueError("quantile must be in (0, 1)")
    if bins <= 0 or iterations <= 0:
        raise ValueError("bins and iterations must be positive")
    pts = np.asarray(cloud.points, dtype=np.float64)
    convention = getattr(cloud, "convention", "y-down")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    sign = 1.0 if convention == "y-down" else -1.0
    z = pts[:, 2]
    g = sign * pts[:, 1]  # "groundness": ground side is always max g

    z_min, z_max = float(np.min(z)), float(np.max(z))
    if z_max - z_min < 1e-12:
        raise GeometryError("degenerate cloud: all points share one z value")

    edges = np.linspace(z_min, z_max, bins + 1)
    which = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, bins - 1)
    selected = []
    for b in range(bins):
        members = np.nonzero(which == b)[0]
        if members.size == 0:
            continue
        order = members[np.argsort(-g[members], kind="stable")]
        pick = int(round(q * (order.size - 1)))
        selected.append(int(order[pick]))
    selected = np.asarray(selected, dtype=int)
    if selected.size < 2 or np.ptp(z[selected]) < 1e-12:
        raise GeometryError("degenerate cloud: too little z spread among ground picks")

    slope, intercept = np.polyfit(z[selected], g[selected], 1)
    inliers = selected
    for _ in range(iterations - 1):
        resid_in = g[inliers] - (slope * z[inliers] + intercept)
        band = max(float(np.std(resid_in)), 1e-9)
        resid = g - (slope * z + intercept)
        candidates = np.nonzero(np.abs(resid) <= band)[0]
        if candidates.size < 2 or np.ptp(z[candidates]) < 1e-12:
            break
        slope, intercept = np.polyfit(z[candidates], g[candidates], 1)
        inliers = candidates

    return GroundLine(
        slope=float(sign * slope),
        intercept=float(sign * intercept),
        inlier_indices=tuple(int(i) for i in inliers),
    )


def extrinsics_from_ground(line: GroundLine, convention: str = "y-down") -> CameraExtrinsics:
    """Camera pose implied by the fitted stage line.

    The tilt about the camera x-axis is atan of the line slope; the
    camera height over the stage is intercept * cos(tilt).  The returned
    transform maps the fitted floor onto the world plane y = 0 with +y up.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    # A y-up camera frame mirrors both y and z relative to y-down, so the
    # physical line keeps its slope and only the intercept changes sign.
    slope = line.slope
    intercept = line.intercept if convention == "y-down" else -line.intercept
    phi = float(np.arctan(slope))
    height = float(intercept * np.cos(phi))
    return canonical_camera(height, -phi, convention=convention)


def to_world(
    ts: TrackSet,
    base: CameraExtrinsics,
    per_frame: Optional[PerFrameMotion] = None,
) -> TrackSet:
    """Map every track from camera into world coordinates.

    Each point p becomes R_f (R_b p + t_b) + t_f where (R_b, t_b) is the
    base pose and (R_f, t_f) the per-frame camera motion (identity when
    absent).  2D keypoints are image-space and stay untouched.
    """
    from .model import Skeleton  # local import keeps module load order simple

    motion = per_frame or PerFrameMotion()
    new_tracks = []
    for track in ts.tracks:
        samples = []
        for s in track.samples:
            ext = motion.at(s.frame).compose(base) if len(motion) else base
            samples.append(
                TrackSample(
                    frame=s.frame,
                    skeleton=Skeleton(ext.apply(s.skeleton.joints3d), s.skeleton.joints2d),
                    world_pelvis=ext.apply(s.world_pelvis),
                    det_index=s.det_index,
                )
            )
        new_tracks.append(Track(id=track.id, samples=samples, provenance=track.provenance))
    return TrackSet(fps=ts.fps, layout=ts.layout, tracks=new_tracks)
