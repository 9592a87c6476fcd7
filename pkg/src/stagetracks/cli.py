"""Command line interface: full pipeline runs plus each stage standalone.

Exit codes: 0 success, 2 any handled pipeline or input error (the message
names the failing stage or input).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, geom, io, scenecut, smooth, synth
from . import cleanse as cleansing
from . import track as tracking
from .errors import StageTracksError
from .model import DetectionSequence, PipelineConfig
from .pipeline import PipelineInputs, planned_stages, run_pipeline


def _emit(data: bytes, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(data.decode("utf-8") + "\n")
    else:
        Path(out).write_bytes(data)


def _load_config(path: str | None, overrides: dict) -> PipelineConfig:
    base = {}
    if path is not None:
        base = json.loads(Path(path).read_text())
    base.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig.from_dict(base)
    except (ValueError, TypeError) as e:
        raise StageTracksError(f"config: {e}") from e


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise StageTracksError(f"--set expects field=value, got {pair!r}")
        key, _, value = pair.partition("=")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _cmd_run(args) -> int:
    config = _load_config(args.config, _parse_overrides(args.set))
    inputs = PipelineInputs(
        detections=Path(args.detections),
        masks=Path(args.masks) if args.masks else None,
        cloud=Path(args.cloud) if args.cloud else None,
        features=Path(args.features) if args.features else None,
        extrinsics=Path(args.extrinsics) if args.extrinsics else None,
    )
    if args.dry_run:
        print(json.dumps(config.to_dict(), indent=2))
        print("planned stages: " + " -> ".join(planned_stages(inputs, config)))
        return 0
    manifest = run_pipeline(config, inputs, Path(args.out_dir))
    for path in manifest.outputs:
        print(path)
    return 0


def _cmd_cut(args) -> int:
    features = io.parse_features(Path(args.features).read_bytes())
    cuts = scenecut.detect_cuts(features, args.threshold)
    _emit(io.write_cuts(cuts.cut_frames), args.out)
    return 0


def _cmd_cleanse(args) -> int:
    seq = io.parse_detections(Path(args.input).read_bytes())
    frames = tuple(
        (f, tuple(cleansing.remove_ghosts(dets, args.min_separation, seq.layout)))
        for f, dets in seq.frames
    )
    cleaned = DetectionSequence(
        fps=seq.fps,
        width=seq.width,
        height=seq.height,
        layout=seq.layout,
        frames=frames,
        frame_offset=seq.frame_offset,
    )
    _emit(io.write_detections(cleaned), args.out)
    return 0


def _cmd_track(args) -> int:
    seq = io.parse_detections(Path(args.input).read_bytes())
    ts = tracking.build_tracks(seq, tracking.track_threshold(seq.fps))
    if args.masks:
        masks = io.parse_masks(Path(args.masks).read_bytes(), seq.width, seq.height)
        asg = tracking.assign_mask_ids(masks, seq)
        ts = tracking.fuse_reid(ts, asg, tracking.reid_min_len(seq.fps))
        ts = type(ts)(ts.fps, ts.layout, ts.active_tracks())
    if args.roi:
        roi_doc = json.loads(Path(args.roi).read_text())
        ts = tracking.roi_filter(ts, [tuple(v) for v in roi_doc["polygon"]])
    _emit(io.write_tracks(ts), args.out)
    return 0


def _cmd_ground(args) -> int:
    cloud = io.parse_pointcloud(Path(args.cloud).read_bytes())
    line = geom.fit_ground_line(cloud, args.quantile, args.bins, args.iterations)
    ext = geom.extrinsics_from_ground(line, cloud.convention)
    doc = {
        "version": io.SCHEMA_VERSION,
        "rotation": ext.rotation.reshape(-1).tolist(),
        "translation": ext.translation.tolist(),
        "ground_line": {"slope": line.slope, "intercept": line.intercept},
    }
    _emit(json.dumps(doc, separators=(",", ":")).encode(), args.out)
    return 0


def _cmd_smooth(args) -> int:
    ts = io.parse_tracks(Path(args.input).read_bytes())
    out = smooth.smooth_tracks(ts, args.smoothing, args.all_joints)
    _emit(io.write_tracks(out, include_discarded=True), args.out)
    return 0


def _cmd_synth(args) -> int:
    spec = synth.ScenarioSpec.from_dict(json.loads(Path(args.spec).read_text()))
    truth, seq, masks, cloud = synth.generate(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "truth.json").write_bytes(io.write_tracks(truth))
    (out_dir / "detections.json").write_bytes(io.write_detections(seq))
    (out_dir / "masks.json").write_bytes(io.write_masks(masks))
    (out_dir / "pointcloud.json").write_bytes(io.write_pointcloud(cloud))
    motion = synth.camera_motion_table(spec)
    if len(motion):
        (out_dir / "extrinsics.json").write_bytes(io.write_extrinsics(motion))
    if spec.scene_cuts:
        features = synth.make_scene_features(spec.frame_count, spec.scene_cuts, seed=spec.seed)
        (out_dir / "features.json").write_bytes(io.write_features(features))
    for name in sorted(p.name for p in out_dir.iterdir()):
        print(out_dir / name)
    return 0


def _cmd_eval(args) -> int:
    result = io.parse_tracks(Path(args.result).read_bytes())
    truth = io.parse_tracks(Path(args.truth).read_bytes())
    report = synth.evaluate(result, truth)
    _emit(json.dumps(report.to_dict(), separators=(",", ":")).encode(), args.out)
    return 0


def _cmd_serve(args) -> int:
    from .serve import create_server  # deferred: serving is optional at runtime

    server = create_server(Path(args.project), host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving {args.project} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stage-tracks",
        description="Refine noisy multi-person 3D pose detections into stable world tracks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--config", help="pipeline config JSON overriding the defaults")
    p.add_argument("--detections", required=True)
    p.add_argument("--masks")
    p.add_argument("--cloud")
    p.add_argument("--features")
    p.add_argument("--extrinsics")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dry-run", action="store_true", help="print the plan, write nothing")
    p.add_argument(
        "--set",
        action="append",
        metavar="FIELD=VALUE",
        help="override a config field (JSON value); beats the config file",
    )
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("cut", help="detect scene cuts from frame features")
    p.add_argument("--features", required=True)
    p.add_argument("--threshold", type=float, default=PipelineConfig().cut_threshold)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_cut)

    p = sub.add_parser("cleanse", help="remove ghost detections per frame")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--min-separation", type=float, default=PipelineConfig().ghost_min_separation)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_cleanse)

    p = sub.add_parser("track", help="link detections into tracks (camera coords)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--masks")
    p.add_argument("--roi", help="JSON file with a \"polygon\" of [x,z] vertices")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_track)

    p = sub.add_parser("ground", help="fit the stage line and derive camera extrinsics")
    p.add_argument("--cloud", required=True)
    p.add_argument("--quantile", type=float, default=PipelineConfig().ground_quantile)
    p.add_argument("--bins", type=int, default=PipelineConfig().ground_bins)
    p.add_argument("--iterations", type=int, default=PipelineConfig().ground_iterations)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_ground)

    p = sub.add_parser("smooth", help="smooth tracks and fill occlusion gaps")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--lambda", dest="smoothing", type=float, default=PipelineConfig().rbf_smoothing)
    p.add_argument("--all-joints", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_smooth)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth scenario")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("eval", help="score a result against ground truth")
    p.add_argument("--result", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("serve", help="serve a project directory to the viewer")
    p.add_argument("--project", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StageTracksError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
