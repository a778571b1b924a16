"""Synthetic fixtures: a stickman body on a 128x128 canvas and head signals.

Used by the test-suite and the ``demo`` command; nothing here is needed for
real recordings.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .csm import PART_JOINTS, PART_LABELS

# Body centred on the canvas with room for +-10 px shifts and 1.1x scaling.
DEFAULT_STICKMAN: Dict[str, Tuple[float, float]] = {
    "head": (64.0, 27.0),
    "neck": (64.0, 39.0),
    "l_shoulder": (54.0, 43.0),
    "l_elbow": (43.0, 54.0),
    "l_wrist": (34.0, 66.0),
    "r_shoulder": (74.0, 43.0),
    "r_elbow": (85.0, 54.0),
    "r_wrist": (94.0, 66.0),
    "pelvis": (64.0, 67.0),
    "l_hip": (57.0, 70.0),
    "l_knee": (52.0, 84.0),
    "l_ankle": (48.0, 99.0),
    "r_hip": (71.0, 70.0),
    "r_knee": (76.0, 84.0),
    "r_ankle": (80.0, 99.0),
}

# capsule radius per part
DEFAULT_RADII = {
    "torso": 10.0, "head": 7.0,
    "l_upper_arm": 5.0, "l_forearm": 5.0, "r_upper_arm": 5.0, "r_forearm": 5.0,
    "l_thigh": 5.5, "l_shank": 5.0, "r_thigh": 5.5, "r_shank": 5.0,
}

# later parts paint over earlier ones
PAINT_ORDER = ("torso", "head", "l_thigh", "r_thigh", "l_shank", "r_shank",
               "l_upper_arm", "r_upper_arm", "l_forearm", "r_forearm")


def _capsule(shape, a, b, radius):
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]]
    p = np.stack([cols, rows], axis=-1).astype(float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d = b - a
    t = np.clip(((p - a) @ d) / max(d @ d, 1e-12), 0.0, 1.0)
    nearest = a + t[..., None] * d
    return np.hypot(*(p - nearest).transpose(2, 0, 1)) <= radius


def render_labeled(joints: Mapping[str, Sequence[float]] = DEFAULT_STICKMAN,
                   shape: Tuple[int, int] = (128, 128),
                   radii: Optional[Mapping[str, float]] = None) -> np.ndarray:
    """Label image (0 background, 1..10 parts) of a capsule stickman."""
    radii = dict(DEFAULT_RADII, **(radii or {}))
    out = np.zeros(shape, dtype=np.uint8)
    for part in PAINT_ORDER:
        a, b = PART_JOINTS[part]
        out[_capsule(shape, joints[a], joints[b], radii[part])] = PART_LABELS[part]
    return out


def step_yaw(n_frames, onset, level=0.8, base=0.0, blips=()):
    """Yaw trace at ``base`` that jumps to ``level`` from frame ``onset`` on.

    ``blips`` lists ``(start, length)`` excursions to ``level`` that revert.
    """
    yaw = np.full(n_frames, float(base))
    for start, length in blips:
        yaw[start:start + length] = level
    yaw[onset:] = level
    return yaw


def pitch_dip(n_frames, contact, onset_after, recover_after, depth=-20.0):
    """Cumulative pitch flat at 0, down to ``depth`` between two offsets from contact."""
    pitch = np.zeros(n_frames)
    pitch[contact + onset_after:contact + recover_after] = depth
    return pitch


# Ear/eye/nose layout used to turn a yaw trace into landmark boxes: ear at
# EAR, eye at EAR + EYE_OFFSET, nose at EAR + (x, NOSE_DY). Over this x range
# the yaw rises monotonically from about -0.99 to 0.99.
EAR = (100.0, 100.0)
EYE_OFFSET = (20.0, -4.0)
NOSE_DY = 12.0
_NOSE_X_RANGE = (23.2, 400.0)


def nose_offset_for_yaw(yaw: float) -> float:
    """Horizontal nose offset from the ear giving the requested yaw."""
    from scipy.optimize import brentq

    from .geometry_head import yaw_from_points

    def f(x):
        return yaw_from_points((x, NOSE_DY), EYE_OFFSET, (0.0, 0.0)) - yaw

    lo, hi = _NOSE_X_RANGE
    if not f(lo) <= 0 <= f(hi):
        raise ValueError(f"yaw {yaw} outside the reachable range")
    return brentq(f, lo, hi, xtol=1e-12)


def landmark_frames(yaw, drop=None, box=6.0):
    """Landmark frames reproducing ``yaw``.

    ``drop`` optionally moves eye and nose down relative to the ear by the
    given per-frame amount (pitch). Cumulative pitch then equals
    ``2 * (drop[0] + drop[1] - drop[t-1] - drop[t])``.
    """
    from .geometry_head import Box2D, LandmarkFrame

    yaw = np.asarray(yaw, dtype=float)
    drop = np.zeros_like(yaw) if drop is None else np.asarray(drop, dtype=float)
    cache = {}
    frames = []
    for t, (v, d) in enumerate(zip(yaw, drop)):
        if v not in cache:
            cache[v] = nose_offset_for_yaw(v)
        x = cache[v]
        ex, ey = EAR
        frames.append(LandmarkFrame(
            t,
            left_ear=Box2D(ex, ey, box, box),
            left_eye=Box2D(ex + EYE_OFFSET[0], ey + EYE_OFFSET[1] + d, box, box),
            nose=Box2D(ex + x, ey + NOSE_DY + d, box, box),
        ))
    return frames


def observations_from_frames(frames):
    """Tracker and detector agreeing on every box, as parse_landmarks returns."""
    from .fusion import FeatureObservation

    out = []
    for f in frames:
        obs = {}
        for name in ("left_ear", "left_eye", "nose"):
            b = getattr(f, name)
            obs[name] = FeatureObservation(name, b, b, 1.0)
        out.append((f.frame_index, obs))
    return out


def canonical_skeleton(asymmetric: bool = True):
    """Standing skeleton with the left arm hanging straight down.

    With ``asymmetric`` the right arm is held out horizontally; otherwise it
    mirrors the left arm about the body midline.
    """
    from .asymmetry import Skeleton2D

    joints = dict(DEFAULT_STICKMAN)
    joints["l_elbow"] = (54.0, 58.0)
    joints["l_wrist"] = (54.0, 73.0)
    if asymmetric:
        joints["r_elbow"] = (89.0, 43.0)
        joints["r_wrist"] = (104.0, 43.0)
    else:
        joints["r_elbow"] = (74.0, 58.0)
        joints["r_wrist"] = (74.0, 73.0)
    return Skeleton2D(joints)
