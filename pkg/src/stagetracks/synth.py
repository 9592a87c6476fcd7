"""Synthetic scenario generator and metric evaluator.

Generates a ground-truth world, renders it into the degraded camera-space
observations the pipeline ingests (noise, ghost duplicates, occlusion
windows, corrupted masks, audience bystanders), and scores pipeline
output against the truth.  Every scenario is fully deterministic under
its seed, which makes the generator usable as an oracle in tests.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ScenarioError
from .geom import CameraExtrinsics, PerFrameMotion, canonical_camera
from .io import FrameFeatures, MaskEntry, MaskFrame, PointCloud
from .model import (
    Detection,
    DetectionSequence,
    JointLayout,
    Skeleton,
    Track,
    TrackSample,
    TrackSet,
)

# Rigid body template relative to the pelvis, world axes (+y up), meters.
_TEMPLATE = np.array(
    [
        [0.00, 0.00, 0.00],  # pelvis
        [0.00, 0.60, 0.00],  # head
        [-0.25, 0.45, 0.00],  # left shoulder
        [0.25, 0.45, 0.00],  # right shoulder
        [-0.12, -0.85, 0.00],  # left foot
        [0.12, -0.85, 0.00],  # right foot
        [0.00, 0.30, 0.00],  # chest
    ]
)
_JOINT_NAMES = ("pelvis", "head", "l_shoulder", "r_shoulder", "l_foot", "r_foot", "chest")

LAYOUT = JointLayout(
    joint_count=7, pelvis_index=0, head_index=1, joint_names=_JOINT_NAMES
)

DANCER_IDSAM_BASE = 100
AUDIENCE_IDSAM_BASE = 200
MASK_PAD_PX = 25


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to generate one deterministic scenario."""

    dancer_count: int = 2
    duration_s: float = 10.0
    fps: float = 100.0
    waypoints: Optional[tuple[tuple[tuple[float, float], ...], ...]] = None
    speed_limit: float = 3.0
    pelvis_height: float = 0.9
    stage_polygon: tuple[tuple[float, float], ...] = ((-6.0, 1.0), (6.0, 1.0), (6.0, 11.0), (-6.0, 11.0))
    # degradations
    sigma_xy: float = 0.0
    sigma_depth: float = 0.0
    ghost_rate: float = 0.0
    ghost_offset: float = 0.25
    ghost_score_penalty: float = 0.2
    occlusions: tuple[tuple[int, int, int], ...] = ()  # (dancer, first, last) inclusive
    mask_corruption_rate: float = 0.0
    audience: tuple[tuple[float, float], ...] = ()
    # camera
    camera_height: float = 1.5
    camera_pitch: float = 0.12  # radians, downward
    camera_pan_amplitude: float = 0.0  # meters of sinusoidal world-x motion
    # rendering
    width: int = 1280
    height: int = 720
    focal_px: float = 700.0
    # scene structure (for cut-detection features)
    scene_cuts: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.waypoints is not None:
            object.__setattr__(
                self,
                "waypoints",
                tuple(tuple((float(x), float(z)) for x, z in path) for path in self.waypoints),
            )
        object.__setattr__(self, "occlusions", tuple(tuple(map(int, o)) for o in self.occlusions))
        object.__setattr__(self, "audience", tuple((float(x), float(z)) for x, z in self.audience))
        object.__setattr__(self, "scene_cuts", tuple(int(c) for c in self.scene_cuts))
        object.__setattr__(
            self, "stage_polygon", tuple((float(x), float(z)) for x, z in self.stage_polygon)
        )

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.fps))

    def base_camera(self) -> CameraExtrinsics:
        return canonical_camera(self.camera_height, self.camera_pitch)

    def check(self):
        if self.dancer_count < 0 or self.fps <= 0 or self.duration_s <= 0:
            raise ScenarioError("dancer_count, fps and duration_s must be positive")
        for name in ("ghost_rate", "mask_corruption_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ScenarioError(f"{name} must be in [0, 1]")
        for dancer, first, last in self.occlusions:
            if not (0 <= dancer < self.dancer_count):
                raise ScenarioError(f"occlusion names unknown dancer {dancer}")
            if not (0 <= first <= last < self.frame_count):
                raise ScenarioError(f"occlusion range ({first}, {last}) outside the scenario")
        if self.waypoints is not None and len(self.waypoints) != self.dancer_count:
            raise ScenarioError("waypoints must list one path per dancer")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = _tuples_to_lists(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown scenario field: {sorted(unknown)[0]}")
        return cls(**{k: _lists_to_tuples(v) for k, v in d.items()})


def _tuples_to_lists(v):
    return [_tuples_to_lists(x) for x in v] if isinstance(v, (tuple, list)) else v


def _lists_to_tuples(v):
    return tuple(_lists_to_tuples(x) for x in v) if isinstance(v, list) else v


@dataclass(frozen=True)
class EvalReport:
    """Pipeline-output quality against ground truth."""

    id_consistency: float
    position_rmse: float
    track_count_error: int
    ghost_survivors: int
    missed_frames: int

    def to_dict(self) -> dict:
        return {
            "id_consistency": self.id_consistency,
            "position_rmse": self.position_rmse,
            "track_count_error": self.track_count_error,
            "ghost_survivors": self.ghost_survivors,
            "missed_frames": self.missed_frames,
        }


# ---------------------------------------------------------------------------
# Motion

_PATROL_SPEED = 0.6  # m/s along the default loops


def _default_waypoints(spec: ScenarioSpec) -> tuple[tuple[tuple[float, float], ...], ...]:
    """Rectangle patrol loops, one per dancer, spread across the stage.

    Waypoints are sampled along each loop at equal arc steps so segment
    speeds stay near the patrol speed for any duration.
    """
    n = spec.dancer_count
    span = min(7.2, 2.8 * max(n - 1, 1))
    spacing = span / max(n - 1, 1)
    half_x = max(0.3, min(0.8, spacing / 2 - 0.6))  # keeps closest approach >= 1.2 m
    paths = []
    for d in range(n):
        cx = 0.0 if n == 1 else -span / 2 + span * d / (n - 1)
        cz = 6.0
        corners = np.array(
            [
                [cx - half_x, cz - 1.2],
                [cx + half_x, cz - 1.2],
                [cx + half_x, cz + 1.2],
                [cx - half_x, cz + 1.2],
            ]
        )
        loop = np.vstack([corners, corners[:1]])
        seg_len = np.linalg.norm(np.diff(loop, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        perimeter = cum[-1]

        def point_at(s: float) -> tuple[float, float]:
            s = s % perimeter
            i = int(np.searchsorted(cum, s, side="right")) - 1
            i = min(i, len(seg_len) - 1)
            a = (s - cum[i]) / seg_len[i]
            p = loop[i] * (1 - a) + loop[i + 1] * a
            return (float(p[0]), float(p[1]))

        segments = max(4, int(np.ceil(spec.duration_s)))
        start = d * perimeter / max(1, n)
        step = _PATROL_SPEED * spec.duration_s / segments
        paths.append(tuple(point_at(start + i * step) for i in range(segments + 1)))
    return tuple(paths)


def _path_positions(path: Sequence[tuple[float, float]], duration: float, times: np.ndarray) -> np.ndarray:
    """Piecewise-linear traversal of the waypoints over the full duration."""
    pts = np.asarray(path, dtype=np.float64)
    if pts.shape[0] == 1:
        return np.repeat(pts, times.size, axis=0)
    m = pts.shape[0] - 1
    seg_t = duration / m
    idx = np.clip((times / seg_t).astype(int), 0, m - 1)
    alpha = (times - idx * seg_t) / seg_t
    return pts[idx] * (1 - alpha)[:, None] + pts[idx + 1] * alpha[:, None]


def _check_speed(path: Sequence[tuple[float, float]], duration: float, limit: float, dancer: int):
    pts = np.asarray(path, dtype=np.float64)
    if pts.shape[0] < 2:
        return
    seg_t = duration / (pts.shape[0] - 1)
    speeds = np.linalg.norm(np.diff(pts, axis=0), axis=1) / seg_t
    if np.any(speeds > limit + 1e-9):
        raise ScenarioError(
            f"dancer {dancer}: waypoint speed {speeds.max():.2f} m/s exceeds limit {limit} m/s"
        )


def _wobble(t: float, dancer: int) -> np.ndarray:
    """Small deterministic sway of the non-pelvis joints."""
    j = np.arange(_TEMPLATE.shape[0])
    dx = 0.03 * np.sin(2 * np.pi * 0.6 * t + dancer + j)
    dz = 0.03 * np.cos(2 * np.pi * 0.45 * t + dancer + 2 * j)
    out = np.stack([dx, np.zeros_like(dx), dz], axis=1)
    out[0] = 0.0  # pelvis is the anchor
    return out


def camera_motion_table(spec: ScenarioSpec) -> PerFrameMotion:
    """Per-frame extrinsic motion on top of the base camera; empty when static."""
    if spec.camera_pan_amplitude == 0.0:
        return PerFrameMotion()
    frames = spec.frame_count
    table = {}
    for k in range(frames):
        shift = spec.camera_pan_amplitude * np.sin(2 * np.pi * k / frames)
        table[k] = CameraExtrinsics(np.eye(3), np.array([shift, 0.0, 0.0]))
    return PerFrameMotion(table)


# ---------------------------------------------------------------------------
# Generation

def _project(points_cam: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    z = points_cam[:, 2]
    u = spec.focal_px * points_cam[:, 0] / z + spec.width / 2.0
    v = spec.focal_px * points_cam[:, 1] / z + spec.height / 2.0
    return np.stack([u, v], axis=1)


def _rect_rle(u0: int, v0: int, u1: int, v1: int, width: int, height: int) -> tuple[int, ...]:
    """RLE runs of an inclusive pixel rectangle, clamped to the image."""
    u0, u1 = max(0, u0), min(width - 1, u1)
    v0, v1 = max(0, v0), min(height - 1, v1)
    if u0 > u1 or v0 > v1:
        return (width * height,)
    runs = [v0 * width + u0]
    fg = u1 - u0 + 1
    gap = width - fg
    for row in range(v0, v1 + 1):
        if row > v0:
            runs.append(gap)
        runs.append(fg)
    runs.append((width - 1 - u1) + (height - 1 - v1) * width)
    return tuple(runs)


def _bbox_rle(kp2d: np.ndarray, spec: ScenarioSpec) -> tuple[int, ...]:
    """Padded bounding-box mask around a person's projected keypoints."""
    lo = kp2d.min(axis=0)
    hi = kp2d.max(axis=0)
    return _rect_rle(
        int(np.floor(lo[0])) - MASK_PAD_PX,
        int(np.floor(lo[1])) - MASK_PAD_PX,
        int(np.ceil(hi[0])) + MASK_PAD_PX,
        int(np.ceil(hi[1])) + MASK_PAD_PX,
        spec.width,
        spec.height,
    )


def generate(
    spec: ScenarioSpec,
) -> tuple[TrackSet, DetectionSequence, list[MaskFrame], PointCloud]:
    """Build (truth, observed detections, masks, point cloud) for a scenario."""
    spec.check()
    paths = spec.waypoints if spec.waypoints is not None else _default_waypoints(spec)
    for d, path in enumerate(paths):
        _check_speed(path, spec.duration_s, spec.speed_limit, d)

    frames = spec.frame_count
    times = np.arange(frames) / spec.fps
    rng = np.random.default_rng([spec.seed, 0])
    rng_gate = np.random.default_rng([spec.seed, 1])
    rng_ghost = np.random.default_rng([spec.seed, 2])

    base = spec.base_camera()
    motion = camera_motion_table(spec)
    occluded = {
        (dancer, frame)
        for dancer, first, last in spec.occlusions
        for frame in range(first, last + 1)
    }

    positions = [ _path_positions(p, spec.duration_s, times) for p in paths ]

    truth_samples: list[list[TrackSample]] = [[] for _ in range(spec.dancer_count)]
    seq_frames = []
    mask_frames = []

    for k in range(frames):
        t = times[k]
        cam_inv = motion.at(k).compose(base).inverse() if len(motion) else base.inverse()

        world_joints = []
        for d in range(spec.dancer_count):
            x, z = positions[d][k]
            pelvis_w = np.array([x, spec.pelvis_height, z])
            world_joints.append(pelvis_w + _TEMPLATE + _wobble(t, d))

        dets = []
        frame_masks = []
        dancer_mask_slots = []
        host_scores: dict[int, float] = {}
        for d in range(spec.dancer_count):
            joints_w = world_joints[d]
            joints_c_true = cam_inv.apply(joints_w)
            kp2d_true = _project(joints_c_true, spec)
            truth_samples[d].append(
                TrackSample(
                    frame=k,
                    skeleton=Skeleton(joints_w, kp2d_true),
                    world_pelvis=joints_w[0],
                )
            )
            noise = rng.normal(
                0.0, [spec.sigma_xy, spec.sigma_xy, spec.sigma_depth], size=3
            )
            score = 0.90 + 0.05 * rng.random()
            if (d, k) in occluded:
                continue
            host_scores[d] = score
            joints_c = joints_c_true + noise
            dets.append(Detection(Skeleton(joints_c, _project(joints_c, spec)), score))
            frame_masks.append(
                MaskEntry(idsam=DANCER_IDSAM_BASE + d, runs=_bbox_rle(kp2d_true, spec))
            )
            dancer_mask_slots.append(len(frame_masks) - 1)

        for i, (ax, az) in enumerate(spec.audience):
            joints_w = np.array([ax, spec.pelvis_height, az]) + _TEMPLATE
            joints_c = cam_inv.apply(joints_w)
            kp2d = _project(joints_c, spec)
            dets.append(Detection(Skeleton(joints_c, kp2d), 0.88))
            frame_masks.append(
                MaskEntry(idsam=AUDIENCE_IDSAM_BASE + i, runs=_bbox_rle(kp2d, spec))
            )

        for d in range(spec.dancer_count):
            gate = rng_gate.random()
            if (d, k) in occluded or gate >= spec.ghost_rate:
                continue
            angle = rng_ghost.uniform(0, 2 * np.pi)
            shift = spec.ghost_offset * np.array([np.cos(angle), 0.0, np.sin(angle)])
            noise = rng_ghost.normal(
                0.0, [spec.sigma_xy, spec.sigma_xy, spec.sigma_depth], size=3
            )
            joints_c = cam_inv.apply(world_joints[d] + shift) + noise
            score = min(1.0, max(0.0, host_scores[d] - spec.ghost_score_penalty))
            dets.append(Detection(Skeleton(joints_c, _project(joints_c, spec)), score))

        corrupt = rng_gate.random()
        if corrupt < spec.mask_corruption_rate and len(dancer_mask_slots) >= 2:
            i, j = rng_gate.choice(len(dancer_mask_slots), size=2, replace=False)
            si, sj = dancer_mask_slots[int(i)], dancer_mask_slots[int(j)]
            a, b = frame_masks[si], frame_masks[sj]
            frame_masks[si] = MaskEntry(idsam=b.idsam, runs=a.runs)
            frame_masks[sj] = MaskEntry(idsam=a.idsam, runs=b.runs)

        seq_frames.append((k, tuple(dets)))
        mask_frames.append(MaskFrame(frame=k, masks=tuple(frame_masks)))

    truth = TrackSet(
        fps=spec.fps,
        layout=LAYOUT,
        tracks=tuple(
            Track(id=d, samples=tuple(truth_samples[d]), provenance="raw")
            for d in range(spec.dancer_count)
        ),
    )
    seq = DetectionSequence(
        fps=spec.fps,
        width=spec.width,
        height=spec.height,
        layout=LAYOUT,
        frames=tuple(seq_frames),
    )
    cloud = _stage_cloud(spec, positions, rng)
    return truth, seq, mask_frames, cloud


def _stage_cloud(spec: ScenarioSpec, positions: list[np.ndarray], rng) -> PointCloud:
    """Exact stage-plane samples plus body clutter above it, in camera coords."""
    poly = np.asarray(spec.stage_polygon)
    x_lo, x_hi = poly[:, 0].min() - 1.0, poly[:, 0].max() + 1.0
    z_lo, z_hi = poly[:, 1].min() - 1.0, poly[:, 1].max() + 1.0
    n_ground, n_clutter = 3500, 1500
    gx = rng.uniform(x_lo, x_hi, n_ground)
    gz = rng.uniform(z_lo, z_hi, n_ground)
    ground = np.stack([gx, np.zeros(n_ground), gz], axis=1)

    clutter = np.empty((n_clutter, 3))
    if spec.dancer_count and positions:
        dancer = rng.integers(0, spec.dancer_count, n_clutter)
        frame = rng.integers(0, positions[0].shape[0], n_clutter)
        anchor = np.stack([positions[d][f] for d, f in zip(dancer, frame)])
        clutter[:, 0] = anchor[:, 0] + rng.uniform(-0.4, 0.4, n_clutter)
        clutter[:, 2] = anchor[:, 1] + rng.uniform(-0.4, 0.4, n_clutter)
    else:
        clutter[:, 0] = rng.uniform(x_lo, x_hi, n_clutter)
        clutter[:, 2] = rng.uniform(z_lo, z_hi, n_clutter)
    clutter[:, 1] = rng.uniform(0.05, 1.75, n_clutter)

    world = np.concatenate([ground, clutter])
    cam = spec.base_camera().inverse().apply(world)
    return PointCloud(points=cam, convention="y-down")


def make_scene_features(
    frame_count: int, cut_frames: Sequence[int], dims: int = 16, seed: int = 0
) -> FrameFeatures:
    """Normalized histograms that drift within scenes and jump at the cuts."""
    rng = np.random.default_rng([seed, 7])
    cuts = sorted(int(c) for c in cut_frames)
    starts = [0] + cuts
    vectors = np.empty((frame_count, dims))
    scene = -1
    base = None
    for k in range(frame_count):
        if starts and scene + 1 < len(starts) and k == starts[scene + 1]:
            scene += 1
            base = np.full(dims, 0.2 / dims)
            base[scene % dims] += 0.8
        row = base + rng.uniform(0.0, 0.004, dims)
        vectors[k] = row / row.sum()
    return FrameFeatures(vectors)


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(result: TrackSet, truth: TrackSet, match_radius: float = 0.5) -> EvalReport:
    """Score a pipeline result against ground truth.

    Samples match frame-by-frame to the nearest world pelvis within the
    radius (greedy global); identity consistency uses the best bijective
    mapping from result ids to truth ids, found exhaustively for up to
    8 identities per side and greedily beyond.
    """
    if result.fps != truth.fps or result.layout.joint_count != truth.layout.joint_count:
        raise InputError("result and truth disagree on fps or layout")

    def by_frame(ts: TrackSet, active_only: bool):
        table: dict[int, list[tuple[int, np.ndarray]]] = {}
        tracks = ts.active_tracks() if active_only else ts.tracks
        for t in tracks:
            for s in t.samples:
                table.setdefault(s.frame, []).append((t.id, s.world_pelvis))
        return table

    res = by_frame(result, active_only=True)
    tru = by_frame(truth, active_only=False)

    votes: Counter = Counter()
    total_result = sum(len(v) for v in res.values())
    total_truth = sum(len(v) for v in tru.values())
    matched_result = 0
    matched_truth = 0
    sq_err = 0.0

    for frame in sorted(set(res) | set(tru)):
        r_list = res.get(frame, [])
        t_list = tru.get(frame, [])
        pairs = []
        for i, (rid, rp) in enumerate(r_list):
            for j, (tid, tp) in enumerate(t_list):
                d = float(np.linalg.norm(rp - tp))
                if d <= match_radius:
                    pairs.append((d, i, j))
        pairs.sort()
        used_r, used_t = set(), set()
        for d, i, j in pairs:
            if i in used_r or j in used_t:
                continue
            used_r.add(i)
            used_t.add(j)
            votes[(r_list[i][0], t_list[j][0])] += 1
            sq_err += d * d
        matched_result += len(used_r)
        matched_truth += len(used_t)

    mapping = _best_mapping(votes)
    correct = sum(votes[(r, t)] for r, t in mapping.items())

    return EvalReport(
        id_consistency=(correct / total_result) if total_result else 1.0,
        position_rmse=float(np.sqrt(sq_err / matched_result)) if matched_result else 0.0,
        track_count_error=len(result.active_tracks()) - len(truth.tracks),
        ghost_survivors=total_result - matched_result,
        missed_frames=total_truth - matched_truth,
    )


def _best_mapping(votes: Counter) -> dict[int, int]:
    """Bijective result-id -> truth-id mapping maximizing agreeing samples."""
    rids = sorted({r for r, _ in votes})
    tids = sorted({t for _, t in votes})
    if not rids or not tids:
        return {}
    if len(rids) <= 8 and len(tids) <= 8:
        best, best_score = {}, -1
        if len(rids) <= len(tids):
            for perm in itertools.permutations(tids, len(rids)):
                score = sum(votes[(r, t)] for r, t in zip(rids, perm))
                if score > best_score:
                    best_score, best = score, dict(zip(rids, perm))
        else:
            for perm in itertools.permutations(rids, len(tids)):
                score = sum(votes[(r, t)] for r, t in zip(perm, tids))
                if score > best_score:
                    best_score, best = score, dict(zip(perm, tids))
        return best
    mapping: dict[int, int] = {}
    taken: set[int] = set()
    for (r, t), _ in votes.most_common():
        if r in mapping or t in taken:
            continue
        mapping[r] = t
        taken.add(t)
    return mapping
