"""Scene cut detection on per-frame feature vectors.

Works on externally extracted normalized histograms rather than decoded
video, so the toolkit stays codec-free.  A frame starts a new scene when
the halved L1 distance to the previous frame's histogram (range [0, 1]
for normalized inputs) exceeds the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FormatError, InputError
from .io import FrameFeatures
from .model import DetectionSequence

import numpy as np


@dataclass(frozen=True)
class CutList:
    """Frames where a new scene starts; the first scene starts at 0 implicitly."""

    cut_frames: tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cut_frames)
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cut frames must be strictly increasing")
        if cuts and cuts[0] <= 0:
            raise ValueError("a cut cannot start before frame 1")
        object.__setattr__(self, "cut_frames", cuts)

    def __len__(self):
        return len(self.cut_frames)


def detect_cuts(features: FrameFeatures, threshold: float = 0.3) -> CutList:
    """Frames whose halved L1 histogram distance to the predecessor exceeds threshold."""
    vec = features.vectors
    if vec.shape[0] < 2:
        raise InputError("need at least 2 frames of features")
    if vec.ndim != 2:
        raise FormatError("feature vectors must all have the same length")
    dist = 0.5 * np.abs(np.diff(vec, axis=0)).sum(axis=1)
    cuts = np.nonzero(dist > threshold)[0] + 1
    return CutList(tuple(int(c) for c in cuts))


def split_sequence(seq: DetectionSequence, cuts: CutList) -> list[DetectionSequence]:
    """Split a sequence at the cut frames into renumbered contiguous pieces.

    Piece k covers original frames [start, next_cut); its frames are
    renumbered from 0 and the original start is kept in ``frame_offset``.
    """
    limit = (seq.frames[-1][0] + 1) if seq.frames else 0
    bounds = [0] + [c for c in cuts.cut_frames if 0 < c < limit] + [limit]
    pieces = []
    for start, end in zip(bounds, bounds[1:]):
        chunk = [(f, dets) for f, dets in seq.frames if start <= f < end]
        pieces.append(
            DetectionSequence(
                fps=seq.fps,
                width=seq.width,
                height=seq.height,
                layout=seq.layout,
                frames=tuple((frame - start, dets) for frame, dets in chunk),
                frame_offset=seq.frame_offset + start,
            )
        )
    return pieces
