"""Multi-person stage-performance track refinement toolkit.

Takes raw per-frame 3D pose detections (camera coordinates) plus optional
segmentation masks, scene point clouds and camera motion, and produces
identity-stable, world-coordinate, smoothed trajectories along with
streamable binary playback data and a local viewer backend.
"""

__version__ = "0.1.0"

from .errors import StageTracksError

__all__ = ["StageTracksError", "__version__"]
