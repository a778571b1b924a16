"""Tracker/detector fusion for the facial-feature boxes.

A tracked box is validated when its center falls inside the detector's box
for the same feature. Two validation failures in a row reset the tracked box
onto the detector's center. The right eye is not tracked. It is looked for
inside a search area placed from the left eye and nose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

from .errors import MissingMandatoryFeature
from .geometry_head import Box2D, LandmarkFrame

MANDATORY_FEATURES = ("left_ear", "left_eye", "nose")
FEATURES = MANDATORY_FEATURES + ("right_eye",)

# consecutive failures that trigger a reset
RESET_AFTER = 2


@dataclass(frozen=True)
class FeatureObservation:
    feature: str
    tracker_box: Optional[Box2D] = None
    detector_box: Optional[Box2D] = None
    detector_score: float = 0.0

    def __post_init__(self):
        if self.feature not in FEATURES:
            raise ValueError(f"unknown feature {self.feature!r}")


@dataclass(frozen=True)
class FusionState:
    failures: Mapping[str, int] = field(default_factory=dict)
    boxes: Mapping[str, Box2D] = field(default_factory=dict)
    reset_events: Tuple[Tuple[int, str], ...] = ()
    # frames rejected by the eye/nose layout check
    constraint_violations: Tuple[int, ...] = ()

    def failure_count(self, feature: str) -> int:
        return self.failures.get(feature, 0)


class SearchArea(NamedTuple):
    box: Box2D
    degenerate: bool


def validate(tracker_box: Box2D, detector_box: Box2D) -> bool:
    """True iff the tracker box center lies inside the detector box (edges count)."""
    return detector_box.contains(tracker_box.center)


def geometric_constraints_ok(left_eye: Box2D, nose: Box2D) -> bool:
    """The left eye must be higher than and to the left of the nose."""
    return left_eye.y < nose.y and left_eye.x < nose.x


def right_eye_search_area(left_eye: Box2D, nose: Box2D, scale: float = 1.5) -> SearchArea:
    """Box mirrored from the left eye through the nose, sized from the eye box.

    When eye and nose centers coincide the offset is zero; the area is then
    centered on the nose and reported as degenerate.
    """
    dx = nose.x - left_eye.x
    dy = nose.y - left_eye.y
    box = Box2D(nose.x + dx, nose.y + dy, scale * left_eye.w, scale * left_eye.h)
    return SearchArea(box, dx == 0 and dy == 0)


def _fuse_feature(obs: FeatureObservation, failures: int, threshold: float):
    """Returns (box, failures, reset) for one mandatory feature."""
    detector = obs.detector_box
    if detector is not None and obs.detector_score < threshold:
        detector = None

    if obs.tracker_box is None:
        if detector is None:
            raise MissingMandatoryFeature(f"{obs.feature}: neither tracker nor detector box")
        return detector, 0, False
    if detector is None:
        # nothing to validate against; keep the tracker and the count as is
        return obs.tracker_box, failures, False
    if validate(obs.tracker_box, detector):
        return obs.tracker_box, 0, False

    failures += 1
    if failures >= RESET_AFTER:
        return obs.tracker_box.moved_to(detector.center), 0, True
    return obs.tracker_box, failures, False


def step(state: FusionState, frame_index: int,
         observations: Mapping[str, FeatureObservation],
         detector_threshold: float = 0.0,
         search_scale: float = 1.5) -> Tuple[FusionState, LandmarkFrame]:
    """Advance the fusion state by one frame.

    ``observations`` maps feature name to its observation; ear, eye and nose
    are mandatory, the right eye is optional. Detector boxes scoring below
    ``detector_threshold`` are ignored.
    """
    failures: Dict[str, int] = dict(state.failures)
    boxes: Dict[str, Box2D] = dict(state.boxes)
    resets = list(state.reset_events)

    for name in MANDATORY_FEATURES:
        obs = observations.get(name)
        if obs is None:
            raise MissingMandatoryFeature(f"frame {frame_index}: no {name} observation")
        box, count, reset = _fuse_feature(obs, failures.get(name, 0), detector_threshold)
        boxes[name] = box
        failures[name] = count
        if reset:
            resets.append((frame_index, name))

    eye, nose = boxes["left_eye"], boxes["nose"]
    layout_ok = geometric_constraints_ok(eye, nose)

    right_box = None
    right_present = False
    right = observations.get("right_eye")
    if right is not None and right.detector_box is not None \
            and right.detector_score >= detector_threshold:
        area = right_eye_search_area(eye, nose, search_scale)
        if area.box.contains(right.detector_box.center):
            right_box = right.detector_box
            right_present = True

    violations = state.constraint_violations
    if not layout_ok:
        violations = violations + (frame_index,)

    new_state = FusionState(failures, boxes, tuple(resets), violations)
    landmarks = LandmarkFrame(
        frame_index=frame_index,
        left_ear=boxes["left_ear"],
        left_eye=eye,
        nose=nose,
        right_eye=right_box,
        right_eye_present=right_present,
        valid=layout_ok,
    )
    return new_state, landmarks


def fuse_sequence(frames: Iterable[Tuple[int, Mapping[str, FeatureObservation]]],
                  detector_threshold: float = 0.0,
                  search_scale: float = 1.5) -> Tuple[FusionState, List[LandmarkFrame]]:
    """Run :func:`step` over ``(frame_index, observations)`` pairs in order."""
    state = FusionState()
    out = []
    for index, observations in frames:
        state, landmarks = step(state, index, observations, detector_threshold, search_scale)
        out.append(landmarks)
    return state, out
