import numpy as np
import pytest

from stagetracks.model import Detection, DetectionSequence, JointLayout, Skeleton


@pytest.fixture
def layout():
    return JointLayout(joint_count=3, pelvis_index=0, head_index=1)


def make_skeleton(pelvis, layout=None, head=None, spread=0.3):
    """Minimal valid skeleton anchored at the given pelvis position."""
    j = layout.joint_count if layout is not None else 3
    pelvis = np.asarray(pelvis, dtype=float)
    joints = np.tile(pelvis, (j, 1))
    joints[1:, 1] += spread * np.arange(1, j)
    if head is not None and layout is not None:
        joints[layout.head_index] = head
    kp2d = np.column_stack([np.linspace(100, 110, j), np.linspace(200, 220, j)])
    return Skeleton(joints, kp2d)


def make_detection(pelvis, score=0.9, layout=None, body_params=None, kp2d_head=None):
    skel = make_skeleton(pelvis, layout)
    if kp2d_head is not None:
        kp2d = np.array(skel.joints2d)
        kp2d[(layout or JointLayout(3, 0, 1)).head_index] = kp2d_head
        skel = Skeleton(skel.joints3d, kp2d)
    return Detection(skeleton=skel, score=score, body_params=body_params)


def make_sequence(frames, fps=30.0, width=640, height=480, layout=None):
    """frames: list of (frame_index, [pelvis positions or Detection])."""
    layout = layout or JointLayout(joint_count=3, pelvis_index=0, head_index=1)
    packed = []
    for frame, items in frames:
        dets = tuple(
            d if isinstance(d, Detection) else make_detection(d, layout=layout) for d in items
        )
        packed.append((frame, dets))
    return DetectionSequence(
        fps=fps, width=width, height=height, layout=layout, frames=tuple(packed)
    )
