#!/usr/bin/env python3
"""Sweep the RBF smoothing parameter on a noisy-depth scenario.

The smoothing value is the one pipeline knob with no principled default,
so this prints the depth error against ground truth across a log sweep to
help pick one for a given noise level.

    python scripts/smoothing_sweep.py [sigma_depth]
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stagetracks import geom, smooth, synth, track


def main():
    sigma = float(sys.argv[1]) if len(sys.argv) > 1 else 0.10
    spec = synth.ScenarioSpec(
        dancer_count=2, duration_s=10.0, fps=50.0, sigma_depth=sigma, seed=77
    )
    truth, seq, _, cloud = synth.generate(spec)
    ts = track.build_tracks(seq, track.track_threshold(seq.fps))
    world = geom.to_world(ts, geom.extrinsics_from_ground(geom.fit_ground_line(cloud)))
    truth_pos = {t.id: {s.frame: s.world_pelvis for s in t.samples} for t in truth.tracks}

    def depth_rmse(result):
        errs = []
        for t in result.active_tracks():
            for s in t.samples:
                candidates = [
                    m[s.frame] for m in truth_pos.values() if s.frame in m
                ]
                ref = min(candidates, key=lambda p: np.linalg.norm(p - s.world_pelvis))
                errs.append((ref[2] - s.world_pelvis[2]) ** 2)
        return np.sqrt(np.mean(errs))

    print(f"sigma_depth = {sigma} m, raw depth rmse = {depth_rmse(world):.4f} m")
    for lam in (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0):
        smoothed = smooth.smooth_tracks(world, lam)
        print(f"  lambda = {lam:<8g} depth rmse = {depth_rmse(smoothed):.4f} m")


if __name__ == "__main__":
    main()
