"""Yaw and pitch head-motion signals from the ear/eye/nose triangle.

Image coordinates throughout: x to the right, y pointing down, in pixels.
The nose, left eye and left ear are represented by the centers of their
tracked bounding boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AllDegenerate,
    DegenerateTriangle,
    FrameGapMismatch,
    TooShort,
    ZeroRatios,
)

Point2D = Tuple[float, float]

# Points closer than this are treated as coincident.
COINCIDENT_EPS = 1e-9


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned box given by its center and size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got {self.w}x{self.h}")

    @property
    def center(self) -> Point2D:
        return (self.x, self.y)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        hw, hh = self.w / 2.0, self.h / 2.0
        return (self.x - hw, self.y - hh, self.x + hw, self.y + hh)

    def contains(self, point: Point2D) -> bool:
        """Inclusive point-in-box test."""
        x0, y0, x1, y1 = self.bounds
        return x0 <= point[0] <= x1 and y0 <= point[1] <= y1

    def moved_to(self, center: Point2D) -> "Box2D":
        return Box2D(float(center[0]), float(center[1]), self.w, self.h)


@dataclass(frozen=True)
class LandmarkFrame:
    frame_index: int
    left_ear: Box2D
    left_eye: Box2D
    nose: Box2D
    right_eye: Optional[Box2D] = None
    right_eye_present: bool = False
    # False when an upstream check (e.g. the eye/nose layout) rejected the frame.
    valid: bool = True


@dataclass(frozen=True)
class YawRatios:
    r_nose_to_eye: float
    r_eye_to_ear: float


@dataclass(frozen=True)
class HeadSignal:
    fps: float
    yaw: np.ndarray
    pitch_cum: np.ndarray
    frame_indices: np.ndarray
    # True where the frame was unusable and the previous value was carried.
    held: np.ndarray
    right_eye_present: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        n = len(self.yaw)
        if len(self.pitch_cum) != n or len(self.frame_indices) != n or len(self.held) != n:
            raise ValueError("HeadSignal channels must have equal length")
        if self.right_eye_present is None:
            object.__setattr__(self, "right_eye_present", np.zeros(n, dtype=bool))

    def __len__(self):
        return len(self.yaw)


def _project(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``p`` onto the line through ``a`` and ``b``."""
    d = b - a
    t = np.dot(p - a, d) / np.dot(d, d)
    return a + t * d


def compute_yaw_ratios(q: Point2D, r: Point2D, s: Point2D) -> YawRatios:
    """Ratios from the nose (q), left eye (r) and left ear (s) positions.

    ``r_nose_to_eye`` is |US|/|QS| with U the foot of r on line QS, and
    ``r_eye_to_ear`` is |VR|/|RS| with V the foot of q on line RS.
    """
    q, r, s = (np.asarray(p, dtype=float) for p in (q, r, s))
    for a, b, names in ((q, r, "nose/eye"), (q, s, "nose/ear"), (r, s, "eye/ear")):
        if np.hypot(*(a - b)) <= COINCIDENT_EPS:
            raise DegenerateTriangle(f"coincident {names} points")

    u = _project(r, q, s)
    v = _project(q, r, s)
    r_nose_to_eye = float(np.hypot(*(u - s)) / np.hypot(*(q - s)))
    r_eye_to_ear = float(np.hypot(*(v - r)) / np.hypot(*(r - s)))
    return YawRatios(r_nose_to_eye, r_eye_to_ear)


def yaw_hat(ratios: YawRatios) -> float:
    """Normalized difference of the two ratios, in [-1, 1].

    Goes to -1 as the child looks to their left and to +1 to their right.
    """
    a, b = ratios.r_eye_to_ear, ratios.r_nose_to_eye
    total = a + b
    if total <= 0:
        raise ZeroRatios("both yaw ratios are zero")
    return (a - b) / total


def _vertical_offsets(frame: LandmarkFrame) -> float:
    ear_y = frame.left_ear.y
    return (frame.left_eye.y - ear_y) + (frame.nose.y - ear_y)


def pitch_increment(frame_now: LandmarkFrame, frame_prev2: LandmarkFrame) -> float:
    """Pitch change over a 2-frame step, positive when the child looks up.

    Sums the vertical movement of eye and nose relative to the ear. With y
    pointing down, rising features decrease their ear-relative y, hence
    ``prev - now``.
    """
    gap = frame_now.frame_index - frame_prev2.frame_index
    if gap != 2:
        raise FrameGapMismatch(f"expected a 2-frame gap, got {gap}")
    return _vertical_offsets(frame_prev2) - _vertical_offsets(frame_now)


def _frame_yaw(frame: LandmarkFrame) -> Optional[float]:
    if not frame.valid:
        return None
    try:
        return yaw_hat(compute_yaw_ratios(frame.nose.center, frame.left_eye.center,
                                          frame.left_ear.center))
    except (DegenerateTriangle, ZeroRatios):
        return None


def head_signal(frames: Sequence[LandmarkFrame], fps: float) -> HeadSignal:
    """Build the per-frame yaw and cumulative pitch signals.

    Unusable frames (degenerate triangle or rejected upstream) carry the last
    usable value and are flagged in ``held``. Leading unusable frames take
    the first usable value. For pitch, an unusable frame two steps back is
    replaced by the last usable frame before it.
    """
    frames = list(frames)
    if len(frames) < 3:
        raise TooShort(f"need at least 3 frames, got {len(frames)}")
    for a, b in zip(frames, frames[1:]):
        if b.frame_index != a.frame_index + 1:
            raise FrameGapMismatch(
                f"frame indices must be contiguous ({a.frame_index} -> {b.frame_index})")

    n = len(frames)
    raw = [_frame_yaw(f) for f in frames]
    usable = np.array([v is not None for v in raw])
    if not usable.any():
        raise AllDegenerate("no frame has a usable ear/eye/nose triangle")

    yaw = np.empty(n)
    first = next(v for v in raw if v is not None)
    last = first
    for t, v in enumerate(raw):
        if v is not None:
            last = v
        yaw[t] = last

    # last usable frame at or before t, for pitch differencing
    ref: list = [None] * n
    prev = None
    for t in range(n):
        if usable[t]:
            prev = frames[t]
        ref[t] = prev

    pitch = np.zeros(n)
    for t in range(2, n):
        pitch[t] = pitch[t - 1]
        if not usable[t] or ref[t - 2] is None:
            continue
        before = ref[t - 2]
        # re-index the stand-in so the 2-frame contract holds
        before = LandmarkFrame(frames[t - 2].frame_index, before.left_ear,
                               before.left_eye, before.nose)
        pitch[t] += pitch_increment(frames[t], before)

    return HeadSignal(
        fps=float(fps),
        yaw=yaw,
        pitch_cum=pitch,
        frame_indices=np.array([f.frame_index for f in frames]),
        held=~usable,
        right_eye_present=np.array([f.right_eye_present for f in frames], dtype=bool),
    )


def yaw_from_points(q: Point2D, r: Point2D, s: Point2D) -> float:
    """Shortcut for ``yaw_hat(compute_yaw_ratios(q, r, s))``."""
    return yaw_hat(compute_yaw_ratios(q, r, s))
