#!/usr/bin/env python3
"""End-to-end demo: synthesize a degraded scenario, refine it, score it.

Writes inputs and outputs under ./demo_project/ so the result can be
explored interactively afterwards:

    python scripts/run_demo.py
    stage-tracks serve --project demo_project --port 8008
    (cd frontend && npm run dev)   # then open the printed URL
"""

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stagetracks import io, synth
from stagetracks.model import PipelineConfig
from stagetracks.pipeline import PipelineInputs, run_pipeline

PROJECT = Path(__file__).resolve().parent.parent / "demo_project"

SPEC = synth.ScenarioSpec(
    dancer_count=2,
    duration_s=20.0,
    fps=100.0,
    sigma_depth=0.05,
    ghost_rate=0.15,
    ghost_offset=0.25,
    occlusions=((0, 600, 680), (1, 1200, 1290)),
    mask_corruption_rate=0.1,
    audience=((9.0, 13.0), (-8.5, 14.0)),
    seed=2024,
)


def main():
    PROJECT.mkdir(exist_ok=True)
    print(f"generating scenario into {PROJECT} ...")
    truth, seq, masks, cloud = synth.generate(SPEC)
    (PROJECT / "detections.json").write_bytes(io.write_detections(seq))
    (PROJECT / "masks.json").write_bytes(io.write_masks(masks))
    (PROJECT / "pointcloud.json").write_bytes(io.write_pointcloud(cloud))
    (PROJECT / "truth.json").write_bytes(io.write_tracks(truth))

    config = PipelineConfig(roi_polygon=SPEC.stage_polygon)
    (PROJECT / "config.json").write_text(json.dumps(config.to_dict(), indent=2))

    started = time.perf_counter()
    manifest = run_pipeline(
        config,
        PipelineInputs(
            detections=PROJECT / "detections.json",
            masks=PROJECT / "masks.json",
            cloud=PROJECT / "pointcloud.json",
        ),
        PROJECT / "out",
        on_stage=lambda stage, frac: print(f"  [{frac:5.0%}] {stage}"),
    )
    print(f"pipeline finished in {time.perf_counter() - started:.1f}s")

    result = io.parse_tracks((PROJECT / "out" / "tracks.json").read_bytes())
    report = synth.evaluate(result, truth)
    print("\nevaluation against ground truth:")
    for key, value in report.to_dict().items():
        print(f"  {key}: {value}")
    print("\noutputs:")
    for path in manifest.outputs:
        print(f"  {path}")


if __name__ == "__main__":
    main()
