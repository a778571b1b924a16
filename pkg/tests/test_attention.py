import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aosivision.attention import (
    AttentionParams,
    TrialAnnotation,
    classify_delay,
    classify_tracking,
    detect_disengagement,
    shared_interest_latency,
)
from aosivision.errors import AnnotationOutOfRange, MissingField, UnknownTask
from aosivision.geometry_head import HeadSignal
from aosivision.synthetic import pitch_dip, step_yaw

FPS = 30.0


def _signal(yaw=None, pitch=None, n=None):
    n = n or len(yaw if yaw is not None else pitch)
    yaw = np.zeros(n) if yaw is None else np.asarray(yaw, float)
    pitch = np.zeros(n) if pitch is None else np.asarray(pitch, float)
    return HeadSignal(FPS, yaw, pitch, np.arange(n), np.zeros(n, bool))


def _dis(p=60, side="left"):
    return TrialAnnotation("disengagement", FPS, presentation_frame=p, target_side=side)


TRACK = TrialAnnotation("tracking", FPS, object_intervals=(
    ("stationary", 0, 29), ("R", 30, 89), ("stationary", 90, 119)))


def _ramp(plateau=None, stop_at=None):
    yaw = np.full(120, -0.6)
    motion = np.linspace(-0.6, 0.6, 60)
    if plateau is not None:
        start, length = plateau
        # insert a flat run and compress the remaining ramp to stay on schedule
        before = np.linspace(-0.6, 0.0, start + 1)[:-1]
        hold = np.full(length, 0.0)
        after = np.linspace(0.0, 0.6, 60 - start - length + 1)[1:]
        motion = np.concatenate([before, hold, after])
    if stop_at is not None:
        motion = np.minimum(motion, stop_at)
    yaw[30:90] = motion
    yaw[90:] = motion[-1]
    return yaw


class TestClassifyDelay:
    @pytest.mark.parametrize("delay,cat", [(0.7, "Pass"), (1.37, "Delayed"), (1.33, "Pass"),
                                           (2.5, "Stuck"), (4 / 3, "Pass"), (7 / 3, "Delayed"),
                                           (0.0, "Pass")])
    def test_examples(self, delay, cat):
        assert classify_delay(delay) == cat

    def test_negative(self):
        with pytest.raises(ValueError):
            classify_delay(-0.1)

    @given(st.floats(0, 10), st.floats(0, 10))
    def test_monotone(self, a, b):
        order = {"Pass": 0, "Delayed": 1, "Stuck": 2}
        lo, hi = sorted((a, b))
        assert order[classify_delay(lo)] <= order[classify_delay(hi)]


class TestDisengagement:
    def test_step_21_frames(self):
        res = detect_disengagement(_signal(step_yaw(150, 81, level=-0.5)), _dis())
        assert res.delay_s == pytest.approx(0.7)
        assert res.category == "Pass"
        assert res.arrival_frame == 81

    def test_right_side(self):
        res = detect_disengagement(_signal(step_yaw(150, 81, level=0.5)), _dis(side="right"))
        assert res.delay_s == pytest.approx(0.7)

    def test_wrong_side_is_no_response(self):
        res = detect_disengagement(_signal(step_yaw(150, 81, level=0.5)), _dis())
        assert res.category == "NoResponse"

    def test_flat(self):
        res = detect_disengagement(_signal(np.zeros(150)), _dis())
        assert res.category == "NoResponse"
        assert res.delay_s is None

    def test_sustain_rule(self):
        yaw = step_yaw(200, 101, level=-0.5, blips=[(65, 2)])
        res = detect_disengagement(_signal(yaw), _dis())
        assert res.delay_s == pytest.approx(41 / 30)
        assert res.category == "Delayed"

    def test_explicit_delta(self):
        yaw = step_yaw(150, 81, level=-0.5)
        yaw[70:81] = -0.2
        res = detect_disengagement(_signal(yaw), _dis(), AttentionParams(delta=0.15))
        assert res.arrival_frame == 70

    def test_out_of_range(self):
        with pytest.raises(AnnotationOutOfRange):
            detect_disengagement(_signal(np.zeros(50)), _dis(p=60))

    @settings(max_examples=50)
    @given(st.floats(-0.4, 0.4), st.integers(0, 80))
    def test_offset_invariance(self, c, onset):
        yaw = step_yaw(160, 60 + onset, level=-0.5)
        a = detect_disengagement(_signal(yaw), _dis())
        b = detect_disengagement(_signal(yaw + c), _dis())
        assert a.arrival_frame == b.arrival_frame
        assert a.category == b.category
        assert 0 <= a.delay_s <= 160 / FPS


class TestTracking:
    def test_ramp_pass(self):
        res = classify_tracking(_signal(_ramp()), TRACK)
        assert res.category == "Pass"
        assert res.pause_durations_s == []
        assert res.reached_far_side

    def test_interrupted(self):
        res = classify_tracking(_signal(_ramp(plateau=(20, 14))), TRACK)
        assert res.category == "Interrupted"
        assert res.pause_durations_s == [pytest.approx(14 / 30)]

    def test_short_flat_is_not_a_pause(self):
        res = classify_tracking(_signal(_ramp(plateau=(20, 9))), TRACK)
        assert res.category == "Pass"

    def test_partial(self):
        res = classify_tracking(_signal(_ramp(stop_at=0.0)), TRACK)
        assert res.category == "Partial"
        assert not res.reached_far_side

    def test_no_tracking(self):
        res = classify_tracking(_signal(np.full(120, -0.6)), TRACK)
        assert res.category == "NoTracking"

    def test_leftward_sweep(self):
        ann = TrialAnnotation("tracking", FPS, object_intervals=(
            ("stationary", 0, 29), ("L", 30, 89), ("stationary", 90, 119)))
        res = classify_tracking(_signal(-_ramp()), ann)
        assert res.category == "Pass"

    def test_out_of_range(self):
        ann = TrialAnnotation("tracking", FPS, object_intervals=(("R", 30, 200),))
        with pytest.raises(AnnotationOutOfRange):
            classify_tracking(_signal(_ramp()), ann)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1, 1), min_size=120, max_size=120))
    def test_pass_has_no_long_pause(self, yaw):
        res = classify_tracking(_signal(np.array(yaw)), TRACK)
        assert res.category in ("Pass", "Interrupted", "Partial", "NoTracking")
        if res.category == "Pass":
            assert all(d < 1 / 3 for d in res.pause_durations_s)


class TestSharedInterest:
    ANN = TrialAnnotation("shared_interest", FPS, contact_frame=60)

    def test_dip_22(self):
        res = shared_interest_latency(_signal(pitch=pitch_dip(200, 60, 3, 22)), self.ANN)
        assert res.look_up_latency_s == pytest.approx(22 / 30)
        assert res.look_down_duration_s == pytest.approx(19 / 30)

    def test_dip_251(self):
        res = shared_interest_latency(_signal(pitch=pitch_dip(400, 60, 5, 251)), self.ANN)
        assert res.look_up_latency_s == pytest.approx(251 / 30)

    def test_constant(self):
        res = shared_interest_latency(_signal(pitch=np.zeros(200)), self.ANN)
        assert res.look_up_latency_s is None and res.look_down_duration_s is None

    def test_never_looks_up(self):
        res = shared_interest_latency(_signal(pitch=pitch_dip(200, 60, 3, 500)), self.ANN)
        assert res.look_down_frame == 63
        assert res.look_up_latency_s is None


class TestAnnotation:
    def test_valid_disengagement(self):
        ann = TrialAnnotation("disengagement", presentation_frame=120, target_side="left")
        assert ann.fps == 30

    def test_tracking_needs_intervals(self):
        with pytest.raises(MissingField):
            TrialAnnotation("tracking")

    def test_unknown_task(self):
        with pytest.raises(UnknownTask):
            TrialAnnotation("foo")

    def test_bad_side(self):
        with pytest.raises(MissingField):
            TrialAnnotation("disengagement", presentation_frame=1, target_side="up")
