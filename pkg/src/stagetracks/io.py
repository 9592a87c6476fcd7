"""Readers and writers for every artifact the pipeline touches.

Text artifacts are JSON documents with an explicit schema version; the
binary playback stream is a little-endian format with a per-frame seek
index so that arbitrarily large files can be served frame-by-frame
without ever loading them whole.

Formats
-------
detections.json   {"version", "video": {"fps","width","height"},
                   "layout": {"joint_count","pelvis_index","head_index","joint_names"?},
                   "frames": [{"frame", "detections": [{"score","kp3d","kp2d","body_params"?}]}]}
masks.json        {"version", "frames": [{"frame", "masks": [{"idsam", "rle": [runs...]}]}]}
                  RLE runs alternate background/foreground counts in row-major order.
tracks.json       {"version", "fps", "layout", "tracks":
                   [{"id","provenance","samples": [{"frame","pelvis","kp3d","kp2d","det_index"?}]}]}
pointcloud.json   {"version", "points": [[x,y,z]...], "convention"?: "y-down"|"y-up"}
extrinsics.json   {"version", "frames": [{"frame", "rotation": [9 row-major], "translation": [3]}]}
features.json     {"version", "features": [[...]...]}   (per-frame normalized histograms)
cuts.json         {"version", "cuts": [frame...]}

stream binary     header (32 bytes): magic "STGTRKS\\0", u32 version=1, u32 frame_count,
                  u32 max_persons, u32 joint_count, u32 vertex_count, f32 fps.
                  Then frame_count u64 absolute byte offsets (seek index), then per frame:
                  u32 person_count, per person: i32 id, joint_count*3 f32 world joints,
                  and when vertex_count > 0: vertex_count*3 f32 vertices then normals.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional, Sequence

import numpy as np

from .errors import DimensionError, FormatError, InputError, ParseError, SchemaError
from .geom import CameraExtrinsics, PerFrameMotion
from .model import (
    DISCARDED_ID,
    Detection,
    DetectionSequence,
    JointLayout,
    Skeleton,
    Track,
    TrackSample,
    TrackSet,
    validate,
)

SCHEMA_VERSION = 1

STREAM_MAGIC = b"STGTRKS\x00"
STREAM_VERSION = 1
STREAM_HEADER_SIZE = 32
_HEADER_STRUCT = struct.Struct("<8s5If")


# ---------------------------------------------------------------------------
# JSON plumbing

def _load_json(data: bytes) -> object:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"not valid UTF-8 at byte {e.start}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON at byte {e.pos}: {e.msg}") from e


def _dump_json(doc: dict) -> bytes:
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _obj(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{path}: expected an object")
    return value


def _req(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing field: {path}.{key}" if path else f"missing field: {key}")
    return obj[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}: expected an integer")
    return value


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"{path}: expected a list")
    return value


def _matrix(value, path: str, cols: int, rows: Optional[int] = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"{path}: expected a numeric matrix") from e
    if arr.ndim != 2 or arr.shape[1] != cols or (rows is not None and arr.shape[0] != rows):
        want = f"({rows or 'N'}, {cols})"
        raise SchemaError(f"{path}: expected shape {want}, got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Layouts

def _layout_to_dict(layout: JointLayout) -> dict:
    d = {
        "joint_count": layout.joint_count,
        "pelvis_index": layout.pelvis_index,
        "head_index": layout.head_index,
    }
    if layout.joint_names is not None:
        d["joint_names"] = list(layout.joint_names)
    return d


def _layout_from_dict(obj: dict, path: str) -> JointLayout:
    obj = _obj(obj, path)
    names = obj.get("joint_names")
    if names is not None and (
        not isinstance(names, list) or not all(isinstance(n, str) for n in names)
    ):
        raise SchemaError(f"{path}.joint_names: expected a list of strings")
    try:
        return JointLayout(
            joint_count=_int(_req(obj, "joint_count", path), f"{path}.joint_count"),
            pelvis_index=_int(_req(obj, "pelvis_index", path), f"{path}.pelvis_index"),
            head_index=_int(_req(obj, "head_index", path), f"{path}.head_index"),
            joint_names=tuple(names) if names is not None else None,
        )
    except ValueError as e:
        raise SchemaError(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# Detections

def parse_detections(data: bytes) -> DetectionSequence:
    """Parse and fully validate a detections.json document."""
    doc = _obj(_load_json(data), "<root>")
    video = _obj(_req(doc, "video", ""), "video")
    layout = _layout_from_dict(_req(doc, "layout", ""), "layout")
    frames = []
    for i, frame_obj in enumerate(_list(_req(doc, "frames", ""), "frames")):
        fpath = f"frames[{i}]"
        frame_obj = _obj(frame_obj, fpath)
        frame = _int(_req(frame_obj, "frame", fpath), f"{fpath}.frame")
        dets = []
        for j, det_obj in enumerate(_list(_req(frame_obj, "detections", fpath), f"{fpath}.detections")):
            dpath = f"{fpath}.detections[{j}]"
            det_obj = _obj(det_obj, dpath)
            kp3d = _matrix(_req(det_obj, "kp3d", dpath), f"{dpath}.kp3d", 3, layout.joint_count)
            kp2d = _matrix(_req(det_obj, "kp2d", dpath), f"{dpath}.kp2d", 2, layout.joint_count)
            body = det_obj.get("body_params")
            if body is not None:
                if not isinstance(body, str):
                    raise SchemaError(f"{dpath}.body_params: expected base64 string")
                try:
                    body = base64.b64decode(body.encode("ascii"), validate=True)
                except Exception as e:
                    raise SchemaError(f"{dpath}.body_params: invalid base64") from e
            dets.append(
                Detection(
                    skeleton=Skeleton(kp3d, kp2d),
                    score=_num(_req(det_obj, "score", dpath), f"{dpath}.score"),
                    body_params=body,
                )
            )
        frames.append((frame, tuple(dets)))
    offset = doc.get("frame_offset", 0)
    if not isinstance(offset, int) or isinstance(offset, bool):
        raise SchemaError("frame_offset: expected an integer")
    seq = DetectionSequence(
        fps=_num(_req(video, "fps", "video"), "video.fps"),
        width=_int(_req(video, "width", "video"), "video.width"),
        height=_int(_req(video, "height", "video"), "video.height"),
        layout=layout,
        frames=tuple(frames),
        frame_offset=offset,
    )
    problems = validate(seq)
    if problems:
        raise SchemaError("; ".join(problems))
    return seq


def write_detections(seq: DetectionSequence) -> bytes:
    doc = {
        "version": SCHEMA_VERSION,
        "video": {"fps": seq.fps, "width": seq.width, "height": seq.height},
        "layout": _layout_to_dict(seq.layout),
    }
    if seq.frame_offset:
        doc["frame_offset"] = seq.frame_offset
    doc["frames"] = [
        {
            "frame": frame,
            "detections": [
                {
                    "score": det.score,
                    "kp3d": det.skeleton.joints3d.tolist(),
                    "kp2d": det.skeleton.joints2d.tolist(),
                    **(
                        {"body_params": base64.b64encode(det.body_params).decode("ascii")}
                        if det.body_params is not None
                        else {}
                    ),
                }
                for det in dets
            ],
        }
        for frame, dets in seq.frames
    ]
    return _dump_json(doc)


# ---------------------------------------------------------------------------
# Masks (RLE)

@dataclass(frozen=True)
class MaskEntry:
    """One person mask: external mask-track id plus RLE runs."""

    idsam: int
    runs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))


@dataclass(frozen=True)
class MaskFrame:
    frame: int
    masks: tuple[MaskEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))


def rle_encode(mask: np.ndarray) -> tuple[int, ...]:
    """Encode a 2D binary mask as alternating background/foreground runs."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return ()
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:  # runs must start with a background count
        runs = [0] + runs
    return tuple(int(r) for r in runs)


def rle_decode(runs: Sequence[int], width: int, height: int) -> np.ndarray:
    total = sum(runs)
    if total != width * height:
        raise FormatError(f"RLE runs sum {total} != {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    for i, run in enumerate(runs):
        if i % 2 == 1:
            flat[pos : pos + run] = True
        pos += run
    return flat.reshape(height, width)


def rle_area(runs: Sequence[int]) -> int:
    """Foreground pixel count without decoding."""
    return int(sum(runs[1::2]))


def rle_contains(runs: Sequence[int], pixel_index: int) -> bool:
    """Whether the row-major pixel index falls on foreground, by run walking."""
    if pixel_index < 0:
        return False
    pos = 0
    for i, run in enumerate(runs):
        pos += run
        if pixel_index < pos:
            return i % 2 == 1
    return False


def parse_masks(data: bytes, width: int, height: int) -> list[MaskFrame]:
    """Parse masks.json; every mask must decode to exactly width*height cells."""
    doc = _obj(_load_json(data), "<root>")
    expected = width * height
    out = []
    for i, frame_obj in enumerate(_list(_req(doc, "frames", ""), "frames")):
        fpath = f"frames[{i}]"
        frame_obj = _obj(frame_obj, fpath)
        frame = _int(_req(frame_obj, "frame", fpath), f"{fpath}.frame")
        seen = set()
        masks = []
        for j, mask_obj in enumerate(_list(_req(frame_obj, "masks", fpath), f"{fpath}.masks")):
            mpath = f"{fpath}.masks[{j}]"
            mask_obj = _obj(mask_obj, mpath)
            idsam = _int(_req(mask_obj, "idsam", mpath), f"{mpath}.idsam")
            if idsam < 0:
                raise SchemaError(f"{mpath}.idsam: must be >= 0")
            runs = _list(_req(mask_obj, "rle", mpath), f"{mpath}.rle")
            runs = tuple(_int(r, f"{mpath}.rle[{k}]") for k, r in enumerate(runs))
            if any(r < 0 for r in runs):
                raise SchemaError(f"{mpath}.rle: runs must be nonnegative")
            total = sum(runs)
            if total != expected:
                raise FormatError(
                    f"frame {frame}, idsam {idsam}: RLE runs sum {total}, expected {expected}"
                )
            if idsam in seen:
                raise FormatError(f"frame {frame}: duplicate idsam {idsam}")
            seen.add(idsam)
            masks.append(MaskEntry(idsam=idsam, runs=runs))
        out.append(MaskFrame(frame=frame, masks=tuple(masks)))
    return out


def write_masks(frames: Sequence[MaskFrame]) -> bytes:
    return _dump_json(
        {
            "version": SCHEMA_VERSION,
            "frames": [
                {
                    "frame": f.frame,
                    "masks": [{"idsam": m.idsam, "rle": list(m.runs)} for m in f.masks],
                }
                for f in frames
            ],
        }
    )


# ---------------------------------------------------------------------------
# Tracks

def write_tracks(ts: TrackSet, include_discarded: bool = False) -> bytes:
    """Serialize a track set; refuses discarded (-1) tracks unless asked."""
    if not include_discarded and any(t.id == DISCARDED_ID for t in ts.tracks):
        raise InputError(
            "track set contains discarded (id -1) tracks; "
            "drop them or pass include_discarded=True"
        )
    return _dump_json(
        {
            "version": SCHEMA_VERSION,
            "fps": ts.fps,
            "layout": _layout_to_dict(ts.layout),
            "tracks": [
                {
                    "id": t.id,
                    "provenance": t.provenance,
                    "samples": [
                        {
                            "frame": s.frame,
                            "pelvis": s.world_pelvis.tolist(),
                            "kp3d": s.skeleton.joints3d.tolist(),
                            "kp2d": s.skeleton.joints2d.tolist(),
                            **({"det_index": s.det_index} if s.det_index is not None else {}),
                        }
                        for s in t.samples
                    ],
                }
                for t in ts.tracks
            ],
        }
    )


def parse_tracks(data: bytes) -> TrackSet:
    doc = _obj(_load_json(data), "<root>")
    layout = _layout_from_dict(_req(doc, "layout", ""), "layout")
    tracks = []
    for i, track_obj in enumerate(_list(_req(doc, "tracks", ""), "tracks")):
        tpath = f"tracks[{i}]"
        track_obj = _obj(track_obj, tpath)
        samples = []
        for j, s_obj in enumerate(_list(_req(track_obj, "samples", tpath), f"{tpath}.samples")):
            spath = f"{tpath}.samples[{j}]"
            s_obj = _obj(s_obj, spath)
            pelvis_v = np.asarray(_req(s_obj, "pelvis", spath), dtype=np.float64)
            if pelvis_v.shape != (3,):
                raise SchemaError(f"{spath}.pelvis: expected 3 numbers")
            det_index = s_obj.get("det_index")
            if det_index is not None:
                det_index = _int(det_index, f"{spath}.det_index")
            samples.append(
                TrackSample(
                    frame=_int(_req(s_obj, "frame", spath), f"{spath}.frame"),
                    skeleton=Skeleton(
                        _matrix(_req(s_obj, "kp3d", spath), f"{spath}.kp3d", 3, layout.joint_count),
                        _matrix(_req(s_obj, "kp2d", spath), f"{spath}.kp2d", 2, layout.joint_count),
                    ),
                    world_pelvis=pelvis_v,
                    det_index=det_index,
                )
            )
        provenance = _req(track_obj, "provenance", tpath)
        try:
            tracks.append(
                Track(
                    id=_int(_req(track_obj, "id", tpath), f"{tpath}.id"),
                    samples=tuple(samples),
                    provenance=provenance,
                )
            )
        except ValueError as e:
            raise SchemaError(f"{tpath}: {e}") from e
    try:
        return TrackSet(
            fps=_num(_req(doc, "fps", ""), "fps"), layout=layout, tracks=tuple(tracks)
        )
    except ValueError as e:
        raise SchemaError(str(e)) from e


# ---------------------------------------------------------------------------
# Point clouds, extrinsics, features, cuts

@dataclass(frozen=True, eq=False)
class PointCloud:
    """Scene reconstruction points in camera coordinates."""

    points: np.ndarray  # (N, 3)
    convention: str = "y-down"

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (N, 3)")
        if pts.shape[0] == 0:
            raise ValueError("nonempty required")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.convention == other.convention and np.array_equal(self.points, other.points)


def parse_pointcloud(data: bytes) -> PointCloud:
    doc = _obj(_load_json(data), "<root>")
    pts = _list(_req(doc, "points", ""), "points")
    if not pts:
        raise FormatError("points: nonempty required")
    convention = doc.get("convention", "y-down")
    if convention not in ("y-down", "y-up"):
        raise SchemaError(f"convention: expected 'y-down' or 'y-up', got {convention!r}")
    try:
        return PointCloud(points=_matrix(pts, "points", 3), convention=convention)
    except ValueError as e:
        raise SchemaError(f"points: {e}") from e


def write_pointcloud(cloud: PointCloud) -> bytes:
    return _dump_json(
        {
            "version": SCHEMA_VERSION,
            "convention": cloud.convention,
            "points": cloud.points.tolist(),
        }
    )


def parse_extrinsics(data: bytes) -> PerFrameMotion:
    """Per-frame camera motion; frames not listed default to identity."""
    doc = _obj(_load_json(data), "<root>")
    table = {}
    for i, ext_obj in enumerate(_list(_req(doc, "frames", ""), "frames")):
        path = f"frames[{i}]"
        ext_obj = _obj(ext_obj, path)
        frame = _int(_req(ext_obj, "frame", path), f"{path}.frame")
        rotation = np.asarray(_req(ext_obj, "rotation", path), dtype=np.float64)
        if rotation.shape != (9,):
            raise SchemaError(f"{path}.rotation: expected 9 row-major numbers")
        translation = np.asarray(_req(ext_obj, "translation", path), dtype=np.float64)
        if translation.shape != (3,):
            raise SchemaError(f"{path}.translation: expected 3 numbers")
        try:
            table[frame] = CameraExtrinsics(rotation.reshape(3, 3), translation)
        except ValueError as e:
            raise SchemaError(f"{path}.rotation: {e}") from e
    return PerFrameMotion(table)


def write_extrinsics(motion: PerFrameMotion) -> bytes:
    return _dump_json(
        {
            "version": SCHEMA_VERSION,
            "frames": [
                {
                    "frame": frame,
                    "rotation": ext.rotation.reshape(-1).tolist(),
                    "translation": ext.translation.tolist(),
                }
                for frame, ext in motion.items()
            ],
        }
    )


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    """Per-frame normalized feature vectors (e.g. color histograms)."""

    vectors: np.ndarray  # (frames, dims)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError("features must be a (frames, dims>=1) matrix")
        arr.flags.writeable = False
        object.__setattr__(self, "vectors", arr)

    @property
    def frame_count(self) -> int:
        return self.vectors.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FrameFeatures):
            return NotImplemented
        return np.array_equal(self.vectors, other.vectors)


def parse_features(data: bytes) -> FrameFeatures:
    doc = _obj(_load_json(data), "<root>")
    rows = _list(_req(doc, "features", ""), "features")
    lengths = {len(r) if isinstance(r, list) else -1 for r in rows}
    if len(lengths) > 1:
        raise FormatError("features: all feature vectors must have the same length")
    arr = _matrix(rows, "features", lengths.pop() if lengths else 0)
    if np.any(arr < 0):
        bad = int(np.nonzero(np.any(arr < 0, axis=1))[0][0])
        raise FormatError(f"features[{bad}]: negative values")
    sums = arr.sum(axis=1)
    off = np.nonzero(np.abs(sums - 1.0) > 1e-6)[0]
    if off.size:
        raise FormatError(f"features[{int(off[0])}]: sums to {sums[off[0]]!r}, expected 1")
    try:
        return FrameFeatures(arr)
    except ValueError as e:
        raise SchemaError(f"features: {e}") from e


def write_features(features: FrameFeatures) -> bytes:
    return _dump_json({"version": SCHEMA_VERSION, "features": features.vectors.tolist()})


def parse_cuts(data: bytes) -> list[int]:
    doc = _obj(_load_json(data), "<root>")
    return [_int(c, f"cuts[{i}]") for i, c in enumerate(_list(_req(doc, "cuts", ""), "cuts"))]


def write_cuts(cut_frames: Sequence[int]) -> bytes:
    return _dump_json({"version": SCHEMA_VERSION, "cuts": [int(c) for c in cut_frames]})


# ---------------------------------------------------------------------------
# Stream binary

@dataclass(frozen=True)
class StreamHeader:
    frame_count: int
    max_persons: int
    joint_count: int
    vertex_count: int
    fps: float
    version: int = STREAM_VERSION

    def pack(self) -> bytes:
        return _HEADER_STRUCT.pack(
            STREAM_MAGIC,
            self.version,
            self.frame_count,
            self.max_persons,
            self.joint_count,
            self.vertex_count,
            self.fps,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "StreamHeader":
        if len(data) < STREAM_HEADER_SIZE:
            raise FormatError("stream too short for header")
        magic, version, frames, persons, joints, vertices, fps = _HEADER_STRUCT.unpack(
            data[:STREAM_HEADER_SIZE]
        )
        if magic != STREAM_MAGIC:
            raise FormatError(f"bad stream magic {magic!r}")
        if version != STREAM_VERSION:
            raise FormatError(f"unsupported stream version {version}")
        return cls(
            frame_count=frames,
            max_persons=persons,
            joint_count=joints,
            vertex_count=vertices,
            fps=fps,
        )

    def to_dict(self) -> dict:
        return {
            "magic": STREAM_MAGIC.rstrip(b"\x00").decode("ascii"),
            "version": self.version,
            "frame_count": self.frame_count,
            "max_persons": self.max_persons,
            "joint_count": self.joint_count,
            "vertex_count": self.vertex_count,
            "fps": self.fps,
        }


def estimate_stream_size(
    frame_count: int, persons: int, joint_count: int, vertex_count: int
) -> int:
    """Exact byte size of a stream where every frame carries ``persons`` people."""
    if min(frame_count, persons, joint_count, vertex_count) < 0:
        raise ValueError("arguments must be nonnegative")
    per_person = 4 + joint_count * 12 + (vertex_count * 24 if vertex_count else 0)
    return STREAM_HEADER_SIZE + frame_count * (8 + 4 + persons * per_person)


def write_stream(ts: TrackSet, meshes=None) -> bytes:
    """Pack a track set (discarded ids excluded) into the playback binary.

    ``meshes``, when given, is indexed [frame][person] in the same order
    persons are written (ascending track id) and holds (vertices, normals)
    pairs of identical (V, 3) shape.
    """
    tracks = ts.active_tracks()
    first, last = TrackSet(ts.fps, ts.layout, tracks).frame_range()
    frame_count = last + 1 if last >= first else 0

    by_frame: dict[int, list[tuple[int, TrackSample]]] = {}
    for t in tracks:
        for s in t.samples:
            by_frame.setdefault(s.frame, []).append((t.id, s))
    for frame in by_frame:
        by_frame[frame].sort(key=lambda pair: pair[0])

    vertex_count = 0
    if meshes is not None:
        for frame_meshes in meshes:
            for vertices, normals in frame_meshes:
                vertices = np.asarray(vertices, dtype=np.float64)
                normals = np.asarray(normals, dtype=np.float64)
                if vertices.ndim != 2 or vertices.shape[1] != 3 or vertices.shape != normals.shape:
                    raise DimensionError(
                        "mesh vertices and normals must both have shape (V, 3)"
                    )
                if vertex_count == 0:
                    vertex_count = vertices.shape[0]
                elif vertices.shape[0] != vertex_count:
                    raise DimensionError(
                        f"inconsistent vertex count: {vertices.shape[0]} != {vertex_count}"
                    )

    header = StreamHeader(
        frame_count=frame_count,
        max_persons=max((len(v) for v in by_frame.values()), default=0),
        joint_count=ts.layout.joint_count,
        vertex_count=vertex_count,
        fps=ts.fps,
    )

    payloads = []
    for frame in range(frame_count):
        persons = by_frame.get(frame, [])
        parts = [struct.pack("<I", len(persons))]
        for pos, (track_id, sample) in enumerate(persons):
            parts.append(struct.pack("<i", track_id))
            parts.append(np.asarray(sample.skeleton.joints3d, dtype="<f4").tobytes())
            if vertex_count:
                try:
                    vertices, normals = meshes[frame][pos]
                except (IndexError, TypeError) as e:
                    raise DimensionError(
                        f"missing mesh for frame {frame}, person {pos}"
                    ) from e
                parts.append(np.asarray(vertices, dtype="<f4").tobytes())
                parts.append(np.asarray(normals, dtype="<f4").tobytes())
        payloads.append(b"".join(parts))

    base = STREAM_HEADER_SIZE + 8 * frame_count
    offsets = np.empty(frame_count, dtype="<u8")
    pos = base
    for i, payload in enumerate(payloads):
        offsets[i] = pos
        pos += len(payload)
    return b"".join([header.pack(), offsets.tobytes()] + payloads)


def stream_frame_offsets(data: bytes, header: Optional[StreamHeader] = None) -> np.ndarray:
    header = header or StreamHeader.unpack(data)
    end = STREAM_HEADER_SIZE + 8 * header.frame_count
    return np.frombuffer(data[STREAM_HEADER_SIZE:end], dtype="<u8")


def read_stream_frame(data: bytes, k: int) -> bytes:
    """Payload bytes of frame k (person_count onward) from an in-memory stream."""
    header = StreamHeader.unpack(data)
    if not 0 <= k < header.frame_count:
        raise InputError(f"frame {k} out of range [0, {header.frame_count})")
    offsets = stream_frame_offsets(data, header)
    start = int(offsets[k])
    end = int(offsets[k + 1]) if k + 1 < header.frame_count else len(data)
    return data[start:end]


def read_stream_index(f: BinaryIO) -> tuple[StreamHeader, np.ndarray, int]:
    """Read (header, offsets, file_size) from an open stream file."""
    f.seek(0, 2)
    size = f.tell()
    f.seek(0)
    header = StreamHeader.unpack(f.read(STREAM_HEADER_SIZE))
    raw = f.read(8 * header.frame_count)
    offsets = np.frombuffer(raw, dtype="<u8")
    return header, offsets, size


def read_stream_frame_at(f: BinaryIO, offsets: np.ndarray, size: int, k: int) -> bytes:
    """One seek plus one contiguous read of frame k's payload."""
    if not 0 <= k < offsets.size:
        raise InputError(f"frame {k} out of range [0, {offsets.size})")
    start = int(offsets[k])
    end = int(offsets[k + 1]) if k + 1 < offsets.size else size
    f.seek(start)
    return f.read(end - start)


def decode_stream_frame(header: StreamHeader, payload: bytes) -> list[dict]:
    """Unpack one frame payload into python structures (for tests and clients)."""
    (count,) = struct.unpack_from("<I", payload, 0)
    pos = 4
    people = []
    j = header.joint_count
    v = header.vertex_count
    for _ in range(count):
        (track_id,) = struct.unpack_from("<i", payload, pos)
        pos += 4
        joints = np.frombuffer(payload, dtype="<f4", count=j * 3, offset=pos).reshape(j, 3)
        pos += j * 12
        person = {"id": track_id, "joints": joints}
        if v:
            person["vertices"] = np.frombuffer(payload, dtype="<f4", count=v * 3, offset=pos).reshape(v, 3)
            pos += v * 12
            person["normals"] = np.frombuffer(payload, dtype="<f4", count=v * 3, offset=pos).reshape(v, 3)
            pos += v * 12
        people.append(person)
    return people
