"""Core domain types shared by all pipeline stages.

Everything here is immutable after construction and safe to share across
threads.  Structural invariants (array shapes, index bounds) are enforced
at construction; value-level invariants (score bounds, frame ordering,
finiteness) are reported by :func:`validate` so that malformed ingested
data can be diagnosed instead of crashing half-way through a parse.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

# Reserved track id marking "discard this person" after re-identification.
DISCARDED_ID = -1

PROVENANCE_VALUES = ("raw", "fused", "smoothed")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class JointLayout:
    """Skeleton topology of the upstream pose model.

    The ingestion file declares this explicitly; nothing downstream guesses
    the joint ordering.
    """

    joint_count: int
    pelvis_index: int = 0
    head_index: int = 0
    joint_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.joint_count <= 0:
            raise ValueError("joint_count must be positive")
        if not 0 <= self.pelvis_index < self.joint_count:
            raise ValueError("pelvis_index out of range")
        if not 0 <= self.head_index < self.joint_count:
            raise ValueError("head_index out of range")
        if self.joint_names is not None:
            object.__setattr__(self, "joint_names", tuple(self.joint_names))
            if len(self.joint_names) != self.joint_count:
                raise ValueError("joint_names length must equal joint_count")


@dataclass(frozen=True, eq=False)
class Skeleton:
    """One person's pose: 3D joints in meters, 2D joints in pixels."""

    joints3d: np.ndarray  # (J, 3)
    joints2d: np.ndarray  # (J, 2)

    def __post_init__(self):
        j3 = np.atleast_2d(np.asarray(self.joints3d, dtype=np.float64))
        j2 = np.atleast_2d(np.asarray(self.joints2d, dtype=np.float64))
        if j3.ndim != 2 or j3.shape[1] != 3:
            raise ValueError("joints3d must have shape (J, 3)")
        if j2.ndim != 2 or j2.shape[1] != 2:
            raise ValueError("joints2d must have shape (J, 2)")
        if j3.shape[0] != j2.shape[0]:
            raise ValueError("joints3d and joints2d disagree on joint count")
        object.__setattr__(self, "joints3d", _freeze(j3))
        object.__setattr__(self, "joints2d", _freeze(j2))

    @property
    def joint_count(self) -> int:
        return self.joints3d.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Skeleton):
            return NotImplemented
        return np.array_equal(self.joints3d, other.joints3d) and np.array_equal(
            self.joints2d, other.joints2d
        )

    def __hash__(self):
        return hash((self.joints3d.tobytes(), self.joints2d.tobytes()))


@dataclass(frozen=True, eq=False)
class Detection:
    """One person candidate in one frame.

    ``body_params`` is an opaque payload from the upstream body model; the
    pipeline never interprets it, only passes it through byte-exactly.
    """

    skeleton: Skeleton
    score: float
    body_params: Optional[bytes] = None

    def __post_init__(self):
        object.__setattr__(self, "score", float(self.score))

    def __eq__(self, other):
        if not isinstance(other, Detection):
            return NotImplemented
        return (
            self.skeleton == other.skeleton
            and self.score == other.score
            and self.body_params == other.body_params
        )

    def __hash__(self):
        return hash((self.skeleton, self.score, self.body_params))


@dataclass(frozen=True, eq=False)
class DetectionSequence:
    """Ordered per-frame detections for one contiguous piece of video.

    ``frame_offset`` records where this piece started in the original
    recording when it was produced by a scene split; frames themselves are
    numbered from 0 within the piece.
    """

    fps: float
    width: int
    height: int
    layout: JointLayout
    frames: tuple[tuple[int, tuple[Detection, ...]], ...]
    frame_offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fps", float(self.fps))
        norm = tuple((int(k), tuple(dets)) for k, dets in self.frames)
        object.__setattr__(self, "frames", norm)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def detection_count(self) -> int:
        return sum(len(dets) for _, dets in self.frames)

    def __eq__(self, other):
        if not isinstance(other, DetectionSequence):
            return NotImplemented
        return (
            self.fps == other.fps
            and self.width == other.width
            and self.height == other.height
            and self.layout == other.layout
            and self.frame_offset == other.frame_offset
            and self.frames == other.frames
        )


@dataclass(frozen=True, eq=False)
class TrackSample:
    """One identity's observation at one frame.

    ``world_pelvis`` holds the pelvis anchor in whatever coordinate frame
    the producing stage worked in: camera coordinates for raw tracks,
    world coordinates once extrinsics have been applied.  ``det_index``
    remembers which detection of that frame the sample came from, which
    the re-identification stage needs to look up mask votes.
    """

    frame: int
    skeleton: Skeleton
    world_pelvis: np.ndarray  # (3,)
    det_index: Optional[int] = None

    def __post_init__(self):
        vec = np.asarray(self.world_pelvis, dtype=np.float64).reshape(3)
        object.__setattr__(self, "world_pelvis", _freeze(vec))
        object.__setattr__(self, "frame", int(self.frame))

    def __eq__(self, other):
        if not isinstance(other, TrackSample):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.det_index == other.det_index
            and np.array_equal(self.world_pelvis, other.world_pelvis)
            and self.skeleton == other.skeleton
        )


@dataclass(frozen=True, eq=False)
class Track:
    """An identity-labeled sequence of samples; id -1 means "discard"."""

    id: int
    samples: tuple[TrackSample, ...]
    provenance: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.id < DISCARDED_ID:
            raise ValueError("track id must be >= -1")
        if self.provenance not in PROVENANCE_VALUES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        frames = [s.frame for s in self.samples]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("track frames must be strictly increasing")

    @property
    def first_frame(self) -> int:
        return self.samples[0].frame

    @property
    def last_frame(self) -> int:
        return self.samples[-1].frame

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Track):
            return NotImplemented
        return (
            self.id == other.id
            and self.provenance == other.provenance
            and self.samples == other.samples
        )


@dataclass(frozen=True, eq=False)
class TrackSet:
    """All tracks of one sequence plus the metadata needed to replay them."""

    fps: float
    layout: JointLayout
    tracks: tuple[Track, ...]

    def __post_init__(self):
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "tracks", tuple(self.tracks))
        ids = [t.id for t in self.tracks if t.id != DISCARDED_ID]
        if len(ids) != len(set(ids)):
            raise ValueError("track ids must be unique (except -1)")

    def active_tracks(self) -> tuple[Track, ...]:
        """Tracks that survived re-identification (id != -1)."""
        return tuple(t for t in self.tracks if t.id != DISCARDED_ID)

    def frame_range(self) -> tuple[int, int]:
        """(first, last) frame index over all tracks; (0, -1) when empty."""
        frames = [s.frame for t in self.tracks for s in t.samples]
        if not frames:
            return 0, -1
        return min(frames), max(frames)

    def __eq__(self, other):
        if not isinstance(other, TrackSet):
            return NotImplemented
        return (
            self.fps == other.fps
            and self.layout == other.layout
            and self.tracks == other.tracks
        )


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable threshold of the pipeline, with the calibrated defaults.

    ``track_threshold_anchors`` and ``reid_min_len_anchors`` are (fps, value)
    pairs; the rules interpolate linearly between them and clamp outside.
    """

    ghost_min_separation: float = 0.40
    track_threshold_anchors: tuple[tuple[float, float], ...] = ((30.0, 0.50), (100.0, 0.30))
    reid_min_len_anchors: tuple[tuple[float, float], ...] = ((25.0, 10.0), (100.0, 30.0))
    rbf_smoothing: float = 1e-3
    smooth_all_joints: bool = False
    ground_quantile: float = 0.05
    ground_bins: int = 50
    ground_iterations: int = 3
    cut_threshold: float = 0.3
    roi_polygon: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        object.__setattr__(
            self, "track_threshold_anchors", tuple(map(tuple, self.track_threshold_anchors))
        )
        object.__setattr__(
            self, "reid_min_len_anchors", tuple(map(tuple, self.reid_min_len_anchors))
        )
        if self.roi_polygon is not None:
            object.__setattr__(self, "roi_polygon", tuple(map(tuple, self.roi_polygon)))

    def violations(self) -> list[str]:
        """Field-naming messages for every invalid value; empty when valid."""
        out = []
        if not self.ghost_min_separation > 0:
            out.append("ghost_min_separation: must be positive")
        if not self.rbf_smoothing >= 0:
            out.append("rbf_smoothing: must be nonnegative")
        if not 0 < self.ground_quantile < 1:
            out.append("ground_quantile: must be in (0, 1)")
        if self.ground_bins <= 0:
            out.append("ground_bins: must be positive")
        if self.ground_iterations <= 0:
            out.append("ground_iterations: must be positive")
        if not self.cut_threshold >= 0:
            out.append("cut_threshold: must be nonnegative")
        for name in ("track_threshold_anchors", "reid_min_len_anchors"):
            anchors = getattr(self, name)
            if not anchors:
                out.append(f"{name}: at least one anchor required")
                continue
            fps_values = [a[0] for a in anchors]
            if sorted(fps_values) != fps_values or len(set(fps_values)) != len(fps_values):
                out.append(f"{name}: anchors must be sorted by fps with distinct fps")
            if any(v <= 0 for _, v in anchors):
                out.append(f"{name}: anchor values must be positive")
        if self.roi_polygon is not None and len(self.roi_polygon) < 3:
            out.append("roi_polygon: needs at least 3 vertices")
        return out

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["track_threshold_anchors"] = [list(a) for a in self.track_threshold_anchors]
        d["reid_min_len_anchors"] = [list(a) for a in self.reid_min_len_anchors]
        if self.roi_polygon is not None:
            d["roi_polygon"] = [list(v) for v in self.roi_polygon]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field: {sorted(unknown)[0]}")
        kwargs = dict(d)
        for name in ("track_threshold_anchors", "reid_min_len_anchors"):
            if name in kwargs:
                kwargs[name] = tuple((float(a), float(b)) for a, b in kwargs[name])
        if kwargs.get("roi_polygon") is not None:
            kwargs["roi_polygon"] = tuple((float(x), float(z)) for x, z in kwargs["roi_polygon"])
        return cls(**kwargs)

    def updated(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


def pelvis(skeleton: Skeleton, layout: JointLayout) -> np.ndarray:
    """The 3D pelvis anchor of a skeleton under the given layout."""
    return skeleton.joints3d[layout.pelvis_index]


def validate(seq: DetectionSequence) -> list[str]:
    """Check every invariant of a detection sequence.

    Returns one message per violation, each naming the frame and field
    concerned; an empty list means the sequence is safe for the pipeline.
    """
    out = []
    if not seq.fps > 0:
        out.append(f"video.fps: must be positive, got {seq.fps}")
    if seq.width <= 0 or seq.height <= 0:
        out.append(f"video dimensions: must be positive, got {seq.width}x{seq.height}")
    j = seq.layout.joint_count
    prev_frame = None
    for pos, (frame, dets) in enumerate(seq.frames):
        if prev_frame is not None and frame <= prev_frame:
            out.append(
                f"frames[{pos}].frame: ordering violated, {frame} after {prev_frame}"
            )
        prev_frame = frame
        for i, det in enumerate(dets):
            where = f"frame {frame}, detection {i}"
            if not 0.0 <= det.score <= 1.0:
                out.append(f"{where}: score {det.score} outside [0, 1]")
            if det.skeleton.joint_count != j:
                out.append(
                    f"{where}: joint count {det.skeleton.joint_count} != layout {j}"
                )
            if not np.all(np.isfinite(det.skeleton.joints3d)):
                out.append(f"{where}: joints3d contains non-finite values")
            if not np.all(np.isfinite(det.skeleton.joints2d)):
                out.append(f"{where}: joints2d contains non-finite values")
    return out
