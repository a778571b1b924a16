import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aosivision import io as aio
from aosivision.asymmetry import JOINTS, Skeleton2D
from aosivision.attention import TrialAnnotation
from aosivision.errors import MissingField, NonMonotonicFrames, ParseError, UnknownTask
from aosivision.fusion import FeatureObservation
from aosivision.geometry_head import Box2D, LandmarkFrame
from aosivision.synthetic import DEFAULT_STICKMAN, canonical_skeleton, render_labeled

HEADER = "frame,feature,src,x,y,w,h,score\n"
finite = st.floats(-1e4, 1e4, allow_nan=False)
positive = st.floats(0.01, 1e3)


def _write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLandmarks:
    def test_minimal(self, tmp_path):
        p = _write(tmp_path, HEADER + "0,left_ear,trk,1,2,3,4,\n0,left_eye,trk,5,1,3,4,\n"
                   "0,nose,det,7,8,3,4,0.5\n")
        frames = aio.parse_landmarks(p)
        assert len(frames) == 1
        index, obs = frames[0]
        assert index == 0 and set(obs) == {"left_ear", "left_eye", "nose"}
        assert obs["nose"].tracker_box is None and obs["nose"].detector_score == 0.5

    def test_negative_width(self, tmp_path):
        p = _write(tmp_path, HEADER + "0,nose,trk,1,2,-3,4,\n")
        with pytest.raises(ParseError) as err:
            aio.parse_landmarks(p)
        assert err.value.line == 2

    def test_non_monotonic(self, tmp_path):
        rows = "".join(f"{f},nose,trk,1,2,3,4,\n" for f in (0, 2, 1))
        with pytest.raises(NonMonotonicFrames):
            aio.parse_landmarks(_write(tmp_path, HEADER + rows))

    def test_regrouped_frame(self, tmp_path):
        rows = "0,nose,trk,1,2,3,4,\n1,nose,trk,1,2,3,4,\n0,left_eye,trk,1,2,3,4,\n"
        with pytest.raises(NonMonotonicFrames):
            aio.parse_landmarks(_write(tmp_path, HEADER + rows))

    @pytest.mark.parametrize("row", ["0,mouth,trk,1,2,3,4,", "0,nose,cam,1,2,3,4,",
                                     "0,nose,trk,a,2,3,4,", "0,nose,trk,1,2,3", "x,nose,trk,1,2,3,4,"])
    def test_bad_rows(self, tmp_path, row):
        with pytest.raises(ParseError):
            aio.parse_landmarks(_write(tmp_path, HEADER + row + "\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(ParseError):
            aio.parse_landmarks(_write(tmp_path, "a,b\n"))

    def test_duplicate(self, tmp_path):
        rows = "0,nose,trk,1,2,3,4,\n0,nose,trk,1,2,3,4,\n"
        with pytest.raises(ParseError):
            aio.parse_landmarks(_write(tmp_path, HEADER + rows))

    @settings(max_examples=30)
    @given(st.lists(st.tuples(finite, finite, positive, positive, finite, st.booleans()),
                    min_size=1, max_size=12))
    def test_round_trip(self, tmp_path_factory, boxes):
        frames = []
        for i, (x, y, w, h, score, with_trk) in enumerate(boxes):
            b = Box2D(x, y, w, h)
            obs = {"nose": FeatureObservation("nose", b if with_trk else None, b, score),
                   "left_eye": FeatureObservation("left_eye", b, None, 0.0)}
            frames.append((3 * i, obs))
        p = tmp_path_factory.mktemp("lm") / "l.csv"
        aio.write_landmarks(p, frames)
        back = aio.parse_landmarks(p)
        assert back == [(i, {k: obs[k] for k in obs}) for i, obs in frames]


class TestFused:
    def test_round_trip(self, tmp_path):
        b = lambda x: Box2D(x, x + 1, 2, 3)
        frames = [LandmarkFrame(0, b(1), b(2), b(3), None, False, True),
                  LandmarkFrame(1, b(1.5), b(2.25), b(3), b(9), True, False)]
        aio.write_fused(tmp_path / "f.csv", frames)
        assert aio.parse_fused(tmp_path / "f.csv") == frames


class TestAnnotation:
    def _doc(self, tmp_path, doc):
        p = tmp_path / "a.json"
        p.write_text(json.dumps(doc))
        return p

    def test_disengagement(self, tmp_path):
        ann = aio.parse_annotation(self._doc(tmp_path, {
            "task": "disengagement", "presentation_frame": 120, "target_side": "left"}))
        assert ann.presentation_frame == 120 and ann.fps == 30

    def test_default_fps(self, tmp_path):
        p = self._doc(tmp_path, {"task": "shared_interest", "contact_frame": 3})
        assert aio.parse_annotation(p, default_fps=25).fps == 25

    def test_tracking_without_intervals(self, tmp_path):
        with pytest.raises(MissingField):
            aio.parse_annotation(self._doc(tmp_path, {"task": "tracking"}))

    def test_unknown_task(self, tmp_path):
        with pytest.raises(UnknownTask):
            aio.parse_annotation(self._doc(tmp_path, {"task": "foo"}))

    def test_missing_task(self, tmp_path):
        with pytest.raises(MissingField):
            aio.parse_annotation(self._doc(tmp_path, {"fps": 30}))

    def test_bad_json(self, tmp_path):
        p = tmp_path / "a.json"
        p.write_text("{\n  'task':")
        with pytest.raises(ParseError):
            aio.parse_annotation(p)

    @pytest.mark.parametrize("ann", [
        TrialAnnotation("disengagement", 25.0, presentation_frame=4, target_side="right",
                        trial_id="p1-t2"),
        TrialAnnotation("tracking", 30.0, object_intervals=(("stationary", 0, 9), ("R", 10, 40))),
        TrialAnnotation("shared_interest", 29.97, contact_frame=17),
    ])
    def test_round_trip(self, tmp_path, ann):
        aio.write_annotation(tmp_path / "a.json", ann)
        assert aio.parse_annotation(tmp_path / "a.json") == ann


class TestSkeletons:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        sks = [Skeleton2D({j: tuple(rng.normal(size=2) * 50) for j in JOINTS}) for _ in range(5)]
        aio.write_skeletons(tmp_path / "s.csv", [0, 1, 2, 5, 9], sks)
        frames, back = aio.parse_skeletons(tmp_path / "s.csv")
        assert frames == [0, 1, 2, 5, 9]
        assert back == sks

    def test_missing_joint(self, tmp_path):
        aio.write_skeletons(tmp_path / "s.csv", [0], [canonical_skeleton()])
        text = (tmp_path / "s.csv").read_text().splitlines()
        cells = text[1].split(",")
        cells[5] = ""
        (tmp_path / "s.csv").write_text(text[0] + "\n" + ",".join(cells) + "\n")
        with pytest.raises(ParseError):
            aio.parse_skeletons(tmp_path / "s.csv")

    def test_stickman_round_trip(self, tmp_path):
        aio.write_stickman(tmp_path / "j.json", DEFAULT_STICKMAN)
        assert aio.read_stickman(tmp_path / "j.json") == DEFAULT_STICKMAN

    def test_stickman_missing(self, tmp_path):
        (tmp_path / "j.json").write_text(json.dumps({"joints": {"head": [1, 2]}}))
        with pytest.raises(MissingField):
            aio.read_stickman(tmp_path / "j.json")


class TestPGM:
    def test_labeled_round_trip(self, tmp_path):
        img = render_labeled()
        aio.write_pgm(tmp_path / "m.pgm", img)
        assert np.array_equal(aio.read_pgm(tmp_path / "m.pgm"), img)

    def test_binary_mask(self, tmp_path):
        m = np.zeros((5, 7), bool)
        m[1:3, 2:6] = True
        aio.write_pgm(tmp_path / "b.pgm", m)
        raw = (tmp_path / "b.pgm").read_bytes()
        assert raw.startswith(b"P5\n7 5\n255\n")
        assert np.array_equal(aio.read_pgm(tmp_path / "b.pgm") > 0, m)

    def test_comments_and_16_bit(self, tmp_path):
        data = np.array([[0, 300], [65535, 7]], dtype=">u2")
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 2\n65535\n" + data.tobytes())
        assert aio.read_pgm(tmp_path / "c.pgm").tolist() == [[0, 300], [65535, 7]]

    @pytest.mark.parametrize("raw", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2\n"])
    def test_malformed(self, tmp_path, raw):
        (tmp_path / "x.pgm").write_bytes(raw)
        with pytest.raises(ParseError):
            aio.read_pgm(tmp_path / "x.pgm")

    def test_sequence(self, tmp_path):
        for i in (2, 0, 1):
            aio.write_pgm(tmp_path / f"{i:02d}.pgm", np.full((3, 3), i, np.uint8))
        names, masks = aio.read_mask_sequence(tmp_path)
        assert names == ["00.pgm", "01.pgm", "02.pgm"]
        assert [int(m.sum()) for m in masks] == [0, 9, 9]


def test_rows_round_trip(tmp_path):
    aio.write_rows(tmp_path / "r.csv", ["frame", "v", "flag"],
                   [(0, 0.1, True), (1, np.float64(1 / 3), np.bool_(False))])
    header, rows = aio.read_rows(tmp_path / "r.csv")
    assert header == ["frame", "v", "flag"]
    assert rows == [["0", "0.1", "1"], ["1", repr(1 / 3), "0"]]
