"""Arm-asymmetry measures from 2D skeletons.

Per frame, the left and right arms are compared through three angles:

* upper-arm angle with the downward vertical, in [0, 180];
* elbow angle between upper arm and forearm, in [0, 180];
* forearm angle with the horizontal, up positive, in [-90, 90].

The right arm's x components are negated so that both arms are described
in the same lateral orientation, and global angles are folded onto the
first/fourth quadrants. A frame is asymmetric when the sigmoid score of the
angle differences reaches 1 and the forearm angles differ by 45 degrees or
more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

import numpy as np

from .errors import EmptySequence, ZeroLengthSegment

JOINTS = (
    "head", "neck",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "pelvis",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
)
ARM_JOINTS = ("l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist")

DEFAULT_TAU = 45.0
AD_F_THRESHOLD = 45.0
AS_THRESHOLD = 1.0


@dataclass(frozen=True)
class Skeleton2D:
    joints: Mapping[str, Tuple[float, float]]

    def __getitem__(self, name):
        return self.joints[name]

    def mirrored(self, axis_x: float = 0.0) -> "Skeleton2D":
        """Reflect every joint about the vertical line ``x = axis_x``."""
        return Skeleton2D({k: (2 * axis_x - x, y) for k, (x, y) in self.joints.items()})

    def transformed(self, scale=1.0, dx=0.0, dy=0.0) -> "Skeleton2D":
        return Skeleton2D({k: (scale * x + dx, scale * y + dy)
                           for k, (x, y) in self.joints.items()})


@dataclass(frozen=True)
class ArmAngles:
    u_l: float
    u_r: float
    e_l: float
    e_r: float
    f_l: float
    f_r: float


@dataclass(frozen=True)
class AsymmetryFrame:
    as_u: float
    as_f: float
    as_star: float
    ad_f: float
    asymmetric: bool


def _angle_between(a, b) -> float:
    # atan2 of |cross| and dot stays accurate near 0 and 180 degrees
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a[0] * b[0] + a[1] * b[1]
    return math.degrees(math.atan2(abs(cross), dot))


def _side_angles(sk: Skeleton2D, side: str) -> Tuple[float, float, float]:
    sx, sy = sk[f"{side}_shoulder"]
    ex, ey = sk[f"{side}_elbow"]
    wx, wy = sk[f"{side}_wrist"]
    upper = (ex - sx, ey - sy)
    fore = (wx - ex, wy - ey)
    if math.hypot(*upper) == 0 or math.hypot(*fore) == 0:
        raise ZeroLengthSegment(f"{side} arm has a zero-length segment")
    if side == "r":
        upper = (-upper[0], upper[1])
        fore = (-fore[0], fore[1])

    u = _angle_between(upper, (0.0, 1.0))
    e = _angle_between(upper, fore)
    # y points down, so "up" is -dy; |dx| folds onto quadrants 1 and 4
    f = math.degrees(math.atan2(-fore[1], abs(fore[0])))
    return u, e, f


def arm_angles(sk: Skeleton2D) -> ArmAngles:
    u_l, e_l, f_l = _side_angles(sk, "l")
    u_r, e_r, f_r = _side_angles(sk, "r")
    return ArmAngles(u_l, u_r, e_l, e_r, f_l, f_r)


def asymmetry_score(alpha, tau: float = DEFAULT_TAU, sigma: float = None):
    """Sigmoid score of an angle difference, in (0, 2), equal to 1 at ``tau``.

    ``sigma`` defaults to ``tau / 3``. Accepts scalars or arrays.
    """
    if sigma is None:
        sigma = tau / 3.0
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0):
        raise ValueError("alpha must be non-negative")
    # 2 * expit(x), written to stay finite for large |x|
    x = (alpha - tau) / sigma
    out = 2.0 / (1.0 + np.exp(-np.clip(x, -700, 700)))
    return float(out) if out.ndim == 0 else out


def as_star(angles: ArmAngles, tau: float = DEFAULT_TAU, sigma: float = None):
    """Return ``(as_u, as_f, as_star)`` for one frame."""
    as_u = asymmetry_score(abs(angles.u_l - angles.u_r), tau, sigma)
    as_f = asymmetry_score(abs(angles.e_l - angles.e_r), tau, sigma)
    return as_u, as_f, max(as_u, as_f)


def ad_f(angles: ArmAngles) -> float:
    return abs(angles.f_l - angles.f_r)


def frame_asymmetric(as_star_value: float, ad_f_value: float) -> bool:
    return as_star_value >= AS_THRESHOLD and ad_f_value >= AD_F_THRESHOLD


def asymmetry_frame(sk: Skeleton2D, tau: float = DEFAULT_TAU,
                    sigma: float = None) -> Tuple[ArmAngles, AsymmetryFrame]:
    angles = arm_angles(sk)
    u, f, star = as_star(angles, tau, sigma)
    d = ad_f(angles)
    return angles, AsymmetryFrame(u, f, star, d, frame_asymmetric(star, d))


def static_symmetry(flags: Sequence[bool]) -> float:
    """Percentage of asymmetric frames."""
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise EmptySequence("no frames")
    return 100.0 * flags.sum() / flags.size


def window_length(fps: float) -> int:
    return max(1, int(round(fps / 2.0)))


def dynamic_symmetry(flags: Sequence[bool], fps: float) -> float:
    """Percentage of asymmetric half-second windows.

    Windows are consecutive and non-overlapping; a trailing shorter window
    counts as a window. One asymmetric frame taints its whole window.
    """
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise EmptySequence("no frames")
    if fps <= 0:
        raise ValueError("fps must be positive")
    w = window_length(fps)
    windows = [flags[i:i + w].any() for i in range(0, flags.size, w)]
    return 100.0 * sum(windows) / len(windows)
