"""Identity tracking: frame-to-frame linking, mask-vote re-identification, ROI filtering.

The tracker links pelvis points between consecutive frames when they
move less than an fps-dependent distance; occlusions therefore split a
person into several track fragments with fresh ids.  The external mask
tracker's per-frame ids (idsam) are far more stable over time, so each
fragment votes with the mask id under its head keypoint, long fragments
are relabeled to their majority vote and merged, and short ones are
discarded (id -1).  Finally, an optional region-of-interest polygon on
the world ground plane drops audience tracks.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .io import MaskFrame, rle_area, rle_contains
from .model import (
    DISCARDED_ID,
    DetectionSequence,
    Track,
    TrackSample,
    TrackSet,
    pelvis,
)


@dataclass(frozen=True)
class FpsRule:
    """Piecewise-linear value of fps, clamped at the extreme anchors."""

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        anchors = tuple((float(f), float(v)) for f, v in self.anchors)
        fps_values = [a[0] for a in anchors]
        if not anchors:
            raise ValueError("at least one anchor required")
        if sorted(fps_values) != fps_values or len(set(fps_values)) != len(fps_values):
            raise ValueError("anchors must be sorted by fps with distinct fps values")
        object.__setattr__(self, "anchors", anchors)

    def __call__(self, fps: float) -> float:
        if fps <= 0:
            raise ValueError("fps must be positive")
        xs = [a[0] for a in self.anchors]
        ys = [a[1] for a in self.anchors]
        return float(np.interp(fps, xs, ys))


TRACK_THRESHOLD_ANCHORS = ((30.0, 0.50), (100.0, 0.30))
REID_MIN_LEN_ANCHORS = ((25.0, 10.0), (100.0, 30.0))


def track_threshold(fps: float, anchors=TRACK_THRESHOLD_ANCHORS) -> float:
    """Maximum pelvis move (meters) between consecutive frames to stay one track."""
    return FpsRule(anchors)(fps)


def reid_min_len(fps: float, anchors=REID_MIN_LEN_ANCHORS) -> int:
    """Minimum track length (frames) to earn a mask-vote identity; shorter is discarded."""
    return max(1, int(np.floor(FpsRule(anchors)(fps) + 0.5)))


def build_tracks(seq: DetectionSequence, threshold: float) -> TrackSet:
    """Greedy globally-nearest pelvis linking between consecutive frames.

    Repeatedly links the unmatched (previous-frame track, current
    detection) pair with the smallest pelvis distance while it is below
    the threshold; remaining detections open new tracks with fresh ids.
    Ties break on (track id, detection index), so the result is fully
    deterministic.
    """
    layout = seq.layout
    tracks: list[dict] = []  # {"id": int, "samples": [TrackSample]}
    prev: list[tuple[dict, np.ndarray]] = []
    next_id = 0

    for frame, dets in seq.frames:
        anchors = [np.asarray(pelvis(d.skeleton, layout)) for d in dets]
        candidates = []
        for track, prev_anchor in prev:
            for j, anchor in enumerate(anchors):
                d = float(np.linalg.norm(anchor - prev_anchor))
                if d < threshold:
                    candidates.append((d, track["id"], j, track))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))

        used_tracks: set[int] = set()
        used_dets: set[int] = set()
        assigned: dict[int, dict] = {}
        for d, track_id, j, track in candidates:
            if track_id in used_tracks or j in used_dets:
                continue
            used_tracks.add(track_id)
            used_dets.add(j)
            assigned[j] = track

        current: list[tuple[dict, np.ndarray]] = []
        for j, det in enumerate(dets):
            track = assigned.get(j)
            if track is None:
                track = {"id": next_id, "samples": []}
                next_id += 1
                tracks.append(track)
            track["samples"].append(
                TrackSample(
                    frame=frame,
                    skeleton=det.skeleton,
                    world_pelvis=anchors[j],
                    det_index=j,
                )
            )
            current.append((track, anchors[j]))
        prev = current

    return TrackSet(
        fps=seq.fps,
        layout=layout,
        tracks=tuple(
            Track(id=t["id"], samples=tuple(t["samples"]), provenance="raw") for t in tracks
        ),
    )


class Assignment:
    """Mask-track id (idsam) per detection, per frame; None where unassigned."""

    def __init__(self, by_frame: dict[int, tuple[Optional[int], ...]]):
        self.by_frame = dict(by_frame)

    def idsam_for(self, frame: int, det_index: int) -> Optional[int]:
        row = self.by_frame.get(frame)
        if row is None or not 0 <= det_index < len(row):
            return None
        return row[det_index]

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.by_frame == other.by_frame


def assign_mask_ids(masks: Sequence[MaskFrame], seq: DetectionSequence) -> Assignment:
    """Assign each detection the idsam of the mask under its head pixel.

    The 2D head keypoint is rounded to the nearest pixel; when several
    masks cover it the smallest-area one wins (it is the most specific).
    Heads outside the image get None.
    """
    mask_table = {m.frame: m for m in masks}
    width, height = seq.width, seq.height
    head = seq.layout.head_index
    by_frame = {}
    for frame, dets in seq.frames:
        mask_frame = mask_table.get(frame)
        row: list[Optional[int]] = []
        ordered = (
            sorted(mask_frame.masks, key=lambda m: (rle_area(m.runs), m.idsam))
            if mask_frame
            else []
        )
        for det in dets:
            u, v = det.skeleton.joints2d[head]
            px, py = int(round(float(u))), int(round(float(v)))
            hit = None
            if 0 <= px < width and 0 <= py < height:
                pixel = py * width + px
                for m in ordered:
                    if rle_contains(m.runs, pixel):
                        hit = m.idsam
                        break
            row.append(hit)
        by_frame[frame] = tuple(row)
    return Assignment(by_frame)


def fuse_reid(ts: TrackSet, asg: Assignment, min_len: int) -> TrackSet:
    """Relabel tracks by their majority mask vote and merge equal labels.

    Tracks longer than ``min_len`` take their most frequent idsam as the
    new id (ties: the smaller idsam); everything else, including tracks
    with no votes at all, is discarded with id -1.  Tracks sharing a
    relabeled id merge into one track ordered by frame; when two sources
    collide on a frame the sample from the longer source wins.
    """
    relabeled: list[tuple[int, Track]] = []
    for track in ts.tracks:
        votes = Counter()
        for s in track.samples:
            if s.det_index is None:
                continue
            idsam = asg.idsam_for(s.frame, s.det_index)
            if idsam is not None:
                votes[idsam] += 1
        if len(track.samples) > min_len and votes:
            new_id = min(votes, key=lambda k: (-votes[k], k))
        else:
            new_id = DISCARDED_ID
        relabeled.append((new_id, track))

    groups: dict[int, list[Track]] = {}
    discarded: list[Track] = []
    for new_id, track in relabeled:
        if new_id == DISCARDED_ID:
            discarded.append(track)
        else:
            groups.setdefault(new_id, []).append(track)

    fused: list[Track] = []
    for new_id in sorted(groups):
        sources = sorted(groups[new_id], key=lambda t: (-len(t.samples), t.id))
        chosen: dict[int, TrackSample] = {}
        for source in sources:  # longest first, so first write wins
            for s in source.samples:
                chosen.setdefault(s.frame, s)
        samples = tuple(chosen[f] for f in sorted(chosen))
        fused.append(Track(id=new_id, samples=samples, provenance="fused"))
    for track in discarded:
        fused.append(Track(id=DISCARDED_ID, samples=track.samples, provenance="fused"))

    return TrackSet(fps=ts.fps, layout=ts.layout, tracks=tuple(fused))


def _point_on_segment(x, z, x1, z1, x2, z2, eps=1e-12) -> bool:
    cross = (x2 - x1) * (z - z1) - (z2 - z1) * (x - x1)
    scale = max(abs(x2 - x1), abs(z2 - z1), 1.0)
    if abs(cross) > eps * scale:
        return False
    return min(x1, x2) - eps <= x <= max(x1, x2) + eps and min(z1, z2) - eps <= z <= max(z1, z2) + eps


def point_in_polygon(x: float, z: float, polygon: Sequence[tuple[float, float]]) -> bool:
    """Even-odd test on the (x, z) plane; the boundary counts as inside."""
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, z1 = polygon[i]
        x2, z2 = polygon[(i + 1) % n]
        if _point_on_segment(x, z, x1, z1, x2, z2):
            return True
        if (z1 > z) != (z2 > z):
            x_cross = x1 + (z - z1) * (x2 - x1) / (z2 - z1)
            if x < x_cross:
                inside = not inside
    return inside


def _polygon_area(polygon: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    n = len(polygon)
    for i in range(n):
        x1, z1 = polygon[i]
        x2, z2 = polygon[(i + 1) % n]
        area += x1 * z2 - x2 * z1
    return 0.5 * area


def roi_filter(ts: TrackSet, polygon: Sequence[tuple[float, float]]) -> TrackSet:
    """Drop tracks spending less than half their samples inside the stage polygon."""
    polygon = [(float(x), float(z)) for x, z in polygon]
    if len(polygon) < 3 or abs(_polygon_area(polygon)) < 1e-12:
        raise ConfigError("degenerate ROI polygon: need >= 3 vertices enclosing area")
    kept = []
    for track in ts.tracks:
        if not track.samples:
            continue
        inside = sum(
            1
            for s in track.samples
            if point_in_polygon(float(s.world_pelvis[0]), float(s.world_pelvis[2]), polygon)
        )
        if inside / len(track.samples) >= 0.5:
            kept.append(track)
    return TrackSet(fps=ts.fps, layout=ts.layout, tracks=tuple(kept))
