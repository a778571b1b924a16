"""Scoring of the visual-attention trials from head-motion signals.

Disengagement trials are scored from the delay between the presentation of
the second object and the sustained turn of the head towards it. Tracking
trials are scored from how the yaw follows the object across the midline.
The ball activity reports how long the child takes to look back up after
the ball touches them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import AnnotationOutOfRange, MissingField, UnknownTask
from .geometry_head import HeadSignal

TASKS = ("disengagement", "tracking", "shared_interest")
SIDES = ("left", "right")
INTERVAL_LABELS = ("R", "L", "stationary")

# Disengagement categories; bounds include the 1/3 s live-judgement margin.
PASS_LIMIT_S = 1.0 + 1.0 / 3.0
DELAYED_LIMIT_S = 2.0 + 1.0 / 3.0
_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class AttentionParams:
    """Detection thresholds. ``delta=None`` derives it from each trial."""

    delta: Optional[float] = None
    k: int = 3
    eps: float = 0.01
    pause_s: float = 1.0 / 3.0
    eta: float = 0.15
    delta_p: float = 0.25
    baseline_s: float = 0.5
    # smallest yaw excursion that counts as a head turn at all
    min_excursion: float = 0.05
    # yaw value for a head facing the midline of a tracking sweep
    yaw_midline: float = 0.0


@dataclass(frozen=True)
class TrialAnnotation:
    task: str
    fps: float = 30.0
    presentation_frame: Optional[int] = None
    target_side: Optional[str] = None
    object_intervals: Tuple[Tuple[str, int, int], ...] = ()
    contact_frame: Optional[int] = None
    trial_id: str = ""

    def __post_init__(self):
        if self.task not in TASKS:
            raise UnknownTask(f"unknown task {self.task!r}")
        if self.fps <= 0:
            raise MissingField("fps must be positive")
        if self.task == "disengagement":
            if self.presentation_frame is None:
                raise MissingField("disengagement annotation needs presentation_frame")
            if self.target_side not in SIDES:
                raise MissingField("disengagement annotation needs target_side left|right")
        elif self.task == "tracking":
            if not self.object_intervals:
                raise MissingField("tracking annotation needs object_intervals")
            for label, start, end in self.object_intervals:
                if label not in INTERVAL_LABELS:
                    raise MissingField(f"bad interval label {label!r}")
                if end < start:
                    raise MissingField(f"interval {label} ends before it starts")
            if not any(lab in ("R", "L") for lab, _, _ in self.object_intervals):
                raise MissingField("tracking annotation needs at least one R/L interval")
        elif self.task == "shared_interest":
            if self.contact_frame is None:
                raise MissingField("shared_interest annotation needs contact_frame")


@dataclass(frozen=True)
class DisengagementResult:
    delay_s: Optional[float]
    category: str
    arrival_frame: Optional[int] = None
    baseline: float = 0.0
    threshold: float = 0.0


@dataclass(frozen=True)
class TrackingResult:
    category: str
    pause_durations_s: List[float] = field(default_factory=list)
    reached_far_side: bool = False
    arrival_lag_s: Optional[float] = None
    pauses: List[Tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class SharedInterestResult:
    look_up_latency_s: Optional[float]
    look_down_duration_s: Optional[float]
    look_down_frame: Optional[int] = None
    look_up_frame: Optional[int] = None


def classify_delay(delay_s: float) -> str:
    """Pass up to 4/3 s, Delayed up to 7/3 s, Stuck beyond (bounds inclusive)."""
    if delay_s < 0:
        raise ValueError("delay must be non-negative")
    if delay_s <= PASS_LIMIT_S + _BOUNDARY_TOL:
        return "Pass"
    if delay_s <= DELAYED_LIMIT_S + _BOUNDARY_TOL:
        return "Delayed"
    return "Stuck"


def _window_median(values: np.ndarray, end: int, length: int) -> float:
    start = max(0, end - length)
    if end <= start:
        return float(values[end])
    return float(np.median(values[start:end]))


def _first_sustained(mask: np.ndarray, start: int, k: int) -> Optional[int]:
    """First index ``t >= start`` with ``mask[t:t+k]`` all true."""
    run = 0
    for t in range(start, len(mask)):
        run = run + 1 if mask[t] else 0
        if run >= k:
            return t - k + 1
    return None


def _check_frame(frame: int, n: int, name: str):
    if not 0 <= frame < n:
        raise AnnotationOutOfRange(f"{name}={frame} outside signal of {n} frames")


def detect_disengagement(signal: HeadSignal, ann: TrialAnnotation,
                         params: AttentionParams = AttentionParams()) -> DisengagementResult:
    """Delay from presentation of the second object to a sustained head turn.

    The turn is measured against the median yaw in the ``baseline_s`` window
    before presentation. Arrival is the first frame from which the yaw stays
    at least ``delta`` towards the target side for ``k`` frames. By default
    ``delta`` is half of the largest excursion towards the target after
    presentation.
    """
    if ann.task != "disengagement":
        raise ValueError("annotation is not a disengagement trial")
    yaw = np.asarray(signal.yaw, dtype=float)
    n = len(yaw)
    p = ann.presentation_frame
    _check_frame(p, n, "presentation_frame")

    baseline = _window_median(yaw, p, int(round(params.baseline_s * signal.fps)))
    sign = 1.0 if ann.target_side == "right" else -1.0
    toward = (yaw[p:] - baseline) * sign
    extreme = float(toward.max())

    if params.delta is not None:
        delta = params.delta
    else:
        delta = 0.5 * extreme
    if extreme < params.min_excursion or extreme < delta:
        return DisengagementResult(None, "NoResponse", None, baseline, delta)

    arrival = _first_sustained(toward >= delta, 0, params.k)
    if arrival is None:
        return DisengagementResult(None, "NoResponse", None, baseline, delta)
    delay = arrival / signal.fps
    return DisengagementResult(delay, classify_delay(delay), p + arrival, baseline, delta)


def _plateaus(yaw: np.ndarray, start: int, end: int, eps: float, min_frames: int):
    """Maximal flat runs inside ``[start, end]`` lasting at least ``min_frames``.

    A run of m consecutive steps with ``|diff| <= eps`` spans m + 1 frames.
    Returns ``(first_frame, frame_count)`` pairs.
    """
    segment = yaw[start:end + 1]
    flat = np.abs(np.diff(segment)) <= eps
    out = []
    t = 0
    while t < len(flat):
        if not flat[t]:
            t += 1
            continue
        u = t
        while u < len(flat) and flat[u]:
            u += 1
        frames = u - t + 1
        if frames >= min_frames:
            out.append((start + t, frames))
        t = u
    return out


def classify_tracking(signal: HeadSignal, ann: TrialAnnotation,
                      params: AttentionParams = AttentionParams()) -> TrackingResult:
    """Score a visual-tracking trial as Pass, Interrupted, Partial or NoTracking.

    The object moves during the span of the R/L intervals; it starts on the
    side of the first one and ends on the side of the last one. The head is
    expected to travel from its start level to the mirror image of that
    level about ``yaw_midline``. The far side counts as reached when, from
    the moment the object stops there, the yaw comes within ``eta`` of the
    expected sweep from that target. Flat runs of at least ``pause_s`` while
    the object moves are pauses.
    """
    if ann.task != "tracking":
        raise ValueError("annotation is not a tracking trial")
    yaw = np.asarray(signal.yaw, dtype=float)
    n = len(yaw)
    fps = signal.fps
    for label, start, end in ann.object_intervals:
        _check_frame(start, n, f"{label} interval start")
        _check_frame(end, n, f"{label} interval end")

    moving = sorted((s, e, lab) for lab, s, e in ann.object_intervals if lab in ("R", "L"))
    still = sorted((s, e) for lab, s, e in ann.object_intervals if lab == "stationary")
    motion_start = moving[0][0]
    motion_end = max(e for _, e, _ in moving)
    start_label, far_label = moving[0][2], moving[-1][2]
    if start_label == far_label:
        # single-sided annotation: the object travels towards the labelled side
        start_label = "L" if far_label == "R" else "R"
    far_sign = 1.0 if far_label == "R" else -1.0

    before = [iv for iv in still if iv[1] <= motion_start]
    if before:
        s0, e0 = before[-1]
        start_level = float(np.median(yaw[s0:e0 + 1]))
    else:
        start_level = _window_median(yaw, motion_start,
                                     int(round(params.baseline_s * fps)))
    target = 2.0 * params.yaw_midline - start_level
    sweep = abs(target - start_level)
    if sweep < params.min_excursion:
        # start level already at the midline; fall back to the observed range
        sweep = max(float(np.ptp(yaw)), params.min_excursion)
        target = start_level + far_sign * sweep

    after = [iv for iv in still if iv[0] >= motion_end]
    far_start = after[0][0] if after else motion_end
    tolerance = params.eta * sweep
    progress = (yaw - start_level) * far_sign
    reached_mask = progress >= sweep - tolerance
    hits = np.nonzero(reached_mask[far_start:])[0]
    reached = hits.size > 0
    lag = hits[0] / fps if reached else None

    departed = bool((progress[motion_start:] >= tolerance).any())
    pause_frames = max(1, int(np.ceil(params.pause_s * fps - 1e-9)))
    pauses = _plateaus(yaw, motion_start, motion_end, params.eps, pause_frames)
    durations = [frames / fps for _, frames in pauses]

    if reached:
        category = "Interrupted" if pauses else "Pass"
    elif departed:
        category = "Partial"
    else:
        category = "NoTracking"
    return TrackingResult(category, durations, reached, lag, pauses)


def shared_interest_latency(signal: HeadSignal, ann: TrialAnnotation,
                            params: AttentionParams = AttentionParams()) -> SharedInterestResult:
    """Look-down onset and look-up latency after the ball contacts the child.

    Both events are located relative to the median cumulative pitch over the
    ``baseline_s`` window before contact, with a margin of ``delta_p`` times
    the pitch range of the trial. The child looks down once pitch stays below
    ``baseline - margin`` for ``k`` frames. They look back up at the first
    following frame from which pitch stays at or above that level for ``k``
    frames.
    """
    if ann.task != "shared_interest":
        raise ValueError("annotation is not a shared-interest trial")
    pitch = np.asarray(signal.pitch_cum, dtype=float)
    n = len(pitch)
    c = ann.contact_frame
    _check_frame(c, n, "contact_frame")

    window = int(round(params.baseline_s * signal.fps))
    baseline = _window_median(pitch, c, window)
    span = pitch[max(0, c - window):]
    margin = params.delta_p * float(np.ptp(span))
    if margin <= 0:
        return SharedInterestResult(None, None)

    low = pitch <= baseline - margin
    onset = _first_sustained(low, c, params.k)
    if onset is None:
        return SharedInterestResult(None, None)
    up = _first_sustained(~low, onset, params.k)
    if up is None:
        return SharedInterestResult(None, None, onset, None)
    return SharedInterestResult((up - c) / signal.fps, (up - onset) / signal.fps, onset, up)
