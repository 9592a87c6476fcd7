"""Full pipeline orchestration: inputs in, tracks.json + stream binary out.

Stage order: optional scene cutting, then per scene ghost removal,
frame-to-frame tracking, ground-line extrinsics, world transform,
mask-vote re-identification, optional ROI filtering, smoothing, and
finally the two exports.  Outputs land in the target directory through
atomic renames and are removed again if any stage fails, so concurrent
readers only ever observe complete runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import __version__, cleanse, geom, io, scenecut, track as tracking
from .errors import InputError, StageTracksError
from .model import DetectionSequence, PipelineConfig, TrackSet, validate
from .smooth import smooth_tracks

ProgressFn = Callable[[str, float], None]

STAGES = ("cut", "cleanse", "track", "ground", "world", "assign", "fuse", "roi", "smooth", "write")


@dataclass
class PipelineInputs:
    """Paths of the input artifacts; only detections are mandatory."""

    detections: Path
    masks: Optional[Path] = None
    cloud: Optional[Path] = None
    features: Optional[Path] = None
    extrinsics: Optional[Path] = None

    def named(self) -> list[tuple[str, Optional[Path]]]:
        return [
            ("detections", self.detections),
            ("masks", self.masks),
            ("cloud", self.cloud),
            ("features", self.features),
            ("extrinsics", self.extrinsics),
        ]


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, written after it succeeded."""

    version: str
    config: dict
    inputs: dict
    stages: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "inputs": self.inputs,
            "stages": self.stages,
            "outputs": self.outputs,
        }


class StageFailure(StageTracksError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def planned_stages(inputs: PipelineInputs, config: PipelineConfig) -> list[str]:
    plan = []
    if inputs.features is not None:
        plan.append("cut")
    plan += ["cleanse", "track"]
    if inputs.cloud is not None:
        plan.append("ground")
    plan.append("world")
    if inputs.masks is not None:
        plan += ["assign", "fuse"]
    if config.roi_polygon is not None:
        plan.append("roi")
    plan += ["smooth", "write"]
    return plan


def _split_masks(masks, offset: int, length: int):
    out = []
    for mf in masks:
        if offset <= mf.frame < offset + length:
            out.append(io.MaskFrame(frame=mf.frame - offset, masks=mf.masks))
    return out


def _split_motion(motion: geom.PerFrameMotion, offset: int, length: int) -> geom.PerFrameMotion:
    return geom.PerFrameMotion(
        {f - offset: ext for f, ext in motion.items() if offset <= f < offset + length}
    )


def run_pipeline(
    config: PipelineConfig,
    inputs: PipelineInputs,
    out_dir: Path,
    on_stage: Optional[ProgressFn] = None,
) -> RunManifest:
    """Run every stage and write tracks.json, stream.bin and manifest.json.

    Raises StageFailure (with partial outputs cleaned up) when a stage
    fails; returns the manifest on success.
    """
    out_dir = Path(out_dir)
    problems = config.violations()
    if problems:
        raise InputError("invalid config: " + "; ".join(problems))

    manifest = RunManifest(version=__version__, config=config.to_dict(), inputs={})

    raw: dict[str, bytes] = {}
    for name, path in inputs.named():
        if path is None:
            continue
        path = Path(path)
        if not path.exists():
            raise InputError(f"{name}: file not found: {path}")
        data = path.read_bytes()
        raw[name] = data
        manifest.inputs[name] = {"path": str(path), "sha256": _digest(data)}

    plan = planned_stages(inputs, config)
    done = 0

    def enter(stage: str):
        if on_stage is not None:
            on_stage(stage, min(1.0, done / len(plan)))

    def timed(stage: str, fn, *args, **kwargs):
        nonlocal done
        enter(stage)
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except StageTracksError as e:
            raise StageFailure(stage, e) from e
        manifest.stages.append({"stage": stage, "ms": (time.perf_counter() - t0) * 1e3})
        done += 1
        return result

    seq = io.parse_detections(raw["detections"])
    bad = validate(seq)
    if bad:
        raise InputError("detections: " + "; ".join(bad))
    masks = io.parse_masks(raw["masks"], seq.width, seq.height) if "masks" in raw else None
    cloud = io.parse_pointcloud(raw["cloud"]) if "cloud" in raw else None
    features = io.parse_features(raw["features"]) if "features" in raw else None
    motion = io.parse_extrinsics(raw["extrinsics"]) if "extrinsics" in raw else None

    if features is not None:
        cuts = timed("cut", scenecut.detect_cuts, features, config.cut_threshold)
        pieces = scenecut.split_sequence(seq, cuts)
    else:
        pieces = [seq]

    def process_scene(piece: DetectionSequence) -> TrackSet:
        nonlocal done
        offset, length = piece.frame_offset - seq.frame_offset, (
            piece.frames[-1][0] + 1 if piece.frames else 0
        )

        def do_cleanse():
            return DetectionSequence(
                fps=piece.fps,
                width=piece.width,
                height=piece.height,
                layout=piece.layout,
                frames=tuple(
                    (f, tuple(cleanse.remove_ghosts(dets, config.ghost_min_separation, piece.layout)))
                    for f, dets in piece.frames
                ),
                frame_offset=piece.frame_offset,
            )

        clean = timed("cleanse", do_cleanse)
        threshold = tracking.track_threshold(piece.fps, config.track_threshold_anchors)
        ts = timed("track", tracking.build_tracks, clean, threshold)

        if cloud is not None:
            line = timed(
                "ground",
                geom.fit_ground_line,
                cloud,
                config.ground_quantile,
                config.ground_bins,
                config.ground_iterations,
            )
            base = geom.extrinsics_from_ground(line, cloud.convention)
        else:
            base = geom.CameraExtrinsics.identity()
        scene_motion = _split_motion(motion, offset, length) if motion is not None else None
        ts = timed("world", geom.to_world, ts, base, scene_motion)

        if masks is not None:
            scene_masks = _split_masks(masks, offset, length)
            asg = timed("assign", tracking.assign_mask_ids, scene_masks, clean)
            min_len = tracking.reid_min_len(piece.fps, config.reid_min_len_anchors)
            ts = timed("fuse", tracking.fuse_reid, ts, asg, min_len)

        if config.roi_polygon is not None:
            ts = timed("roi", tracking.roi_filter, ts, config.roi_polygon)

        ts = timed("smooth", smooth_tracks, ts, config.rbf_smoothing, config.smooth_all_joints)
        return TrackSet(fps=ts.fps, layout=ts.layout, tracks=ts.active_tracks())

    results = [process_scene(piece) for piece in pieces]

    def write_outputs():
        out_dir.mkdir(parents=True, exist_ok=True)
        staged: list[tuple[Path, Path]] = []

        def stage_file(final: Path, data: bytes):
            final.parent.mkdir(parents=True, exist_ok=True)
            tmp = final.with_name(final.name + ".tmp")
            tmp.write_bytes(data)
            staged.append((tmp, final))

        try:
            if len(results) == 1:
                scene_dirs = [out_dir]
            else:
                scene_dirs = [out_dir / f"scene_{i:03d}" for i in range(len(results))]
            for piece, ts, scene_dir in zip(pieces, results, scene_dirs):
                stage_file(scene_dir / "tracks.json", io.write_tracks(ts))
                stage_file(scene_dir / "stream.bin", io.write_stream(ts))
                manifest.outputs += [
                    str(scene_dir / "tracks.json"),
                    str(scene_dir / "stream.bin"),
                ]
            for tmp, final in staged:
                os.replace(tmp, final)
        except BaseException:
            for tmp, _ in staged:
                tmp.unlink(missing_ok=True)
            raise

    timed("write", write_outputs)

    manifest_path = out_dir / "manifest.json"
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    tmp.write_bytes(json.dumps(manifest.to_dict(), indent=2).encode())
    os.replace(tmp, manifest_path)
    if on_stage is not None:
        on_stage("done", 1.0)
    return manifest
