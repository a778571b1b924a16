"""Readers and writers for the tool's file formats.

* landmark streams: CSV ``frame,feature,src,x,y,w,h,score`` with ``src`` in
  ``trk``/``det`` and boxes given by center and size;
* fused landmarks: CSV ``frame,feature,x,y,w,h,valid,right_eye_present``;
* trial annotations and stickman joints: JSON documents;
* skeleton sequences: CSV ``frame,head_x,head_y,...`` with all 15 joints;
* masks: binary PGM (P5), 0 background and anything else foreground; the
  initial labeled mask stores part labels 1-10 (see ``csm.PART_LABELS``);
* reports: JSON.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .asymmetry import JOINTS, Skeleton2D
from .attention import TrialAnnotation
from .errors import MissingField, NonMonotonicFrames, ParseError, UnknownTask
from .fusion import FEATURES, FeatureObservation
from .geometry_head import Box2D, LandmarkFrame

LANDMARK_HEADER = ["frame", "feature", "src", "x", "y", "w", "h", "score"]
FUSED_HEADER = ["frame", "feature", "x", "y", "w", "h", "valid", "right_eye_present"]
SKELETON_HEADER = ["frame"] + [f"{j}_{c}" for j in JOINTS for c in ("x", "y")]


def _fmt(value: float) -> str:
    return repr(float(value))


def _number(text, line, path, name):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{name}: not a number: {text!r}", line, path) from None
    if not math.isfinite(value):
        raise ParseError(f"{name}: not finite", line, path)
    return value


def _integer(text, line, path, name):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ParseError(f"{name}: not an integer: {text!r}", line, path) from None


def _open_csv(path, header):
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None
    reader = csv.reader(handle)
    first = next(reader, None)
    if first is None or [c.strip() for c in first] != header:
        handle.close()
        raise ParseError(f"expected header {','.join(header)}", 1, path)
    return handle, reader


# --------------------------------------------------------------------------
# landmark streams

def parse_landmarks(path) -> List[Tuple[int, Dict[str, FeatureObservation]]]:
    """Per-frame feature observations, in file order.

    Rows of one frame must be contiguous and frames must increase.
    """
    handle, reader = _open_csv(path, LANDMARK_HEADER)
    boxes: Dict[int, Dict[str, dict]] = {}
    order: List[int] = []
    with handle:
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(LANDMARK_HEADER):
                raise ParseError(f"expected {len(LANDMARK_HEADER)} fields, got {len(row)}",
                                 line, path)
            frame = _integer(row[0], line, path, "frame")
            feature, src = row[1].strip(), row[2].strip()
            if frame < 0:
                raise ParseError("negative frame index", line, path)
            if feature not in FEATURES:
                raise ParseError(f"unknown feature {feature!r}", line, path)
            if src not in ("trk", "det"):
                raise ParseError(f"src must be trk or det, got {src!r}", line, path)
            x, y, w, h = (_number(row[i], line, path, LANDMARK_HEADER[i]) for i in range(3, 7))
            if w <= 0 or h <= 0:
                raise ParseError("box width and height must be positive", line, path)
            score = _number(row[7], line, path, "score") if row[7].strip() else 0.0

            if not order or order[-1] != frame:
                if frame in boxes or (order and frame < order[-1]):
                    raise NonMonotonicFrames(f"frame {frame} after frame {order[-1]}",
                                             line, path)
                order.append(frame)
                boxes[frame] = {}
            slot = boxes[frame].setdefault(feature, {})
            if src in slot:
                raise ParseError(f"duplicate {src} row for {feature}", line, path)
            slot[src] = (Box2D(x, y, w, h), score)

    out = []
    for frame in order:
        observations = {}
        for feature, slot in boxes[frame].items():
            trk = slot.get("trk")
            det = slot.get("det")
            observations[feature] = FeatureObservation(
                feature,
                tracker_box=trk[0] if trk else None,
                detector_box=det[0] if det else None,
                detector_score=det[1] if det else 0.0,
            )
        out.append((frame, observations))
    return out


def write_landmarks(path, frames: Iterable[Tuple[int, Mapping[str, FeatureObservation]]]):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(LANDMARK_HEADER)
        for frame, observations in frames:
            for feature in FEATURES:
                obs = observations.get(feature)
                if obs is None:
                    continue
                if obs.tracker_box is not None:
                    b = obs.tracker_box
                    writer.writerow([frame, feature, "trk", _fmt(b.x), _fmt(b.y),
                                     _fmt(b.w), _fmt(b.h), ""])
                if obs.detector_box is not None:
                    b = obs.detector_box
                    writer.writerow([frame, feature, "det", _fmt(b.x), _fmt(b.y),
                                     _fmt(b.w), _fmt(b.h), _fmt(obs.detector_score)])


def write_fused(path, frames: Sequence[LandmarkFrame]):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FUSED_HEADER)
        for f in frames:
            for feature in FEATURES:
                box = getattr(f, feature)
                if box is None:
                    continue
                writer.writerow([f.frame_index, feature, _fmt(box.x), _fmt(box.y),
                                 _fmt(box.w), _fmt(box.h), int(f.valid),
                                 int(f.right_eye_present)])


def parse_fused(path) -> List[LandmarkFrame]:
    handle, reader = _open_csv(path, FUSED_HEADER)
    rows: Dict[int, dict] = {}
    with handle:
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(FUSED_HEADER):
                raise ParseError("wrong field count", line, path)
            frame = _integer(row[0], line, path, "frame")
            feature = row[1].strip()
            if feature not in FEATURES:
                raise ParseError(f"unknown feature {feature!r}", line, path)
            vals = [_number(row[i], line, path, FUSED_HEADER[i]) for i in range(2, 6)]
            if vals[2] <= 0 or vals[3] <= 0:
                raise ParseError("box width and height must be positive", line, path)
            entry = rows.setdefault(frame, {"valid": row[6].strip() == "1",
                                            "right": row[7].strip() == "1"})
            entry[feature] = Box2D(*vals)
    out = []
    for frame in sorted(rows):
        e = rows[frame]
        try:
            out.append(LandmarkFrame(frame, e["left_ear"], e["left_eye"], e["nose"],
                                     e.get("right_eye"), e["right"], e["valid"]))
        except KeyError as exc:
            raise ParseError(f"frame {frame} lacks {exc.args[0]}", path=path) from None
    return out


# --------------------------------------------------------------------------
# annotations

def annotation_to_dict(ann: TrialAnnotation) -> dict:
    doc = {"task": ann.task, "fps": ann.fps}
    if ann.trial_id:
        doc["trial_id"] = ann.trial_id
    if ann.presentation_frame is not None:
        doc["presentation_frame"] = ann.presentation_frame
    if ann.target_side is not None:
        doc["target_side"] = ann.target_side
    if ann.object_intervals:
        doc["object_intervals"] = [[lab, s, e] for lab, s, e in ann.object_intervals]
    if ann.contact_frame is not None:
        doc["contact_frame"] = ann.contact_frame
    return doc


def annotation_from_dict(doc: Mapping, path=None, default_fps: float = 30.0) -> TrialAnnotation:
    if "task" not in doc:
        raise MissingField(f"{path or 'annotation'}: missing 'task'")
    task = doc["task"]
    if task not in ("disengagement", "tracking", "shared_interest"):
        raise UnknownTask(f"{path or 'annotation'}: unknown task {task!r}")
    intervals = []
    for item in doc.get("object_intervals") or ():
        try:
            label, start, end = item
            intervals.append((str(label), int(start), int(end)))
        except (TypeError, ValueError):
            raise ParseError(f"bad object interval {item!r}", path=path) from None

    def opt_int(key):
        value = doc.get(key)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{key} must be an integer", path=path)
        return value

    return TrialAnnotation(
        task=task,
        fps=_fps(doc.get("fps", default_fps), path),
        presentation_frame=opt_int("presentation_frame"),
        target_side=doc.get("target_side"),
        object_intervals=tuple(intervals),
        contact_frame=opt_int("contact_frame"),
        trial_id=str(doc.get("trial_id", "")),
    )


def _read_json(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None


def _fps(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"fps must be a number, got {value!r}", path=path)
    return float(value)


def parse_annotation(path, default_fps: float = 30.0) -> TrialAnnotation:
    """Trial annotation; ``default_fps`` applies when the file has no ``fps``."""
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError("annotation must be a JSON object", path=path)
    return annotation_from_dict(doc, path, default_fps)


def write_annotation(path, ann: TrialAnnotation):
    with open(path, "w") as handle:
        json.dump(annotation_to_dict(ann), handle, indent=2)
        handle.write("\n")


# --------------------------------------------------------------------------
# skeletons and stickman joints

def parse_skeletons(path) -> Tuple[List[int], List[Skeleton2D]]:
    handle, reader = _open_csv(path, SKELETON_HEADER)
    frames, skeletons = [], []
    with handle:
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SKELETON_HEADER):
                raise ParseError(f"expected {len(SKELETON_HEADER)} fields, got {len(row)}",
                                 line, path)
            frame = _integer(row[0], line, path, "frame")
            if frames and frame <= frames[-1]:
                raise NonMonotonicFrames(f"frame {frame} after frame {frames[-1]}", line, path)
            for i, cell in enumerate(row[1:], start=1):
                if not cell.strip():
                    raise ParseError(f"missing {SKELETON_HEADER[i]}", line, path)
            values = [_number(c, line, path, SKELETON_HEADER[i + 1])
                      for i, c in enumerate(row[1:])]
            joints = {j: (values[2 * k], values[2 * k + 1]) for k, j in enumerate(JOINTS)}
            frames.append(frame)
            skeletons.append(Skeleton2D(joints))
    return frames, skeletons


def write_skeletons(path, frames: Sequence[int], skeletons: Sequence[Skeleton2D]):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SKELETON_HEADER)
        for frame, sk in zip(frames, skeletons):
            row = [frame]
            for j in JOINTS:
                x, y = sk[j]
                row += [_fmt(x), _fmt(y)]
            writer.writerow(row)


def read_stickman(path) -> Dict[str, Tuple[float, float]]:
    doc = _read_json(path)
    joints = doc.get("joints", doc) if isinstance(doc, dict) else None
    if not isinstance(joints, dict):
        raise ParseError("stickman must be a JSON object of joints", path=path)
    out = {}
    for name, value in joints.items():
        try:
            x, y = value
            out[name] = (float(x), float(y))
        except (TypeError, ValueError):
            raise ParseError(f"joint {name}: expected [x, y]", path=path) from None
    missing = [j for j in JOINTS if j not in out]
    if missing:
        raise MissingField(f"{path}: stickman lacks {missing}")
    return out


def write_stickman(path, joints: Mapping[str, Sequence[float]]):
    with open(path, "w") as handle:
        json.dump({"joints": {j: [float(joints[j][0]), float(joints[j][1])]
                              for j in JOINTS}}, handle, indent=2)
        handle.write("\n")


# --------------------------------------------------------------------------
# PGM

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM as a 2D integer array."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(str(exc), path=path) from None
    pos = 0
    fields = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ParseError("truncated PGM header", path=path)
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise ParseError(f"not a binary PGM (magic {fields[0]!r})", path=path)
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise ParseError("bad PGM header", path=path) from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ParseError("bad PGM dimensions", path=path)
    pos += 1  # single whitespace byte before the raster
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    count = width * height
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos) \
        if len(data) - pos >= count * np.dtype(dtype).itemsize else None
    if raster is None:
        raise ParseError("truncated PGM raster", path=path)
    return raster.reshape(height, width).astype(np.int32)


def write_pgm(path, image: np.ndarray):
    image = np.asarray(image)
    if image.dtype == bool:
        image = image.astype(np.uint8) * 255
    if image.min() < 0 or image.max() > 65535:
        raise ValueError("PGM values must lie in 0..65535")
    maxval = 255 if image.max() < 256 else 65535
    dtype = np.uint8 if maxval == 255 else np.dtype(">u2")
    h, w = image.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        handle.write(image.astype(dtype).tobytes())


def read_mask_sequence(path) -> Tuple[List[str], List[np.ndarray]]:
    """Binary masks from a directory of ``.pgm`` files (sorted by name) or one file."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pgm")
        if not files:
            raise ParseError("no .pgm files in mask directory", path=path)
    else:
        files = [path]
    return [p.name for p in files], [read_pgm(p) > 0 for p in files]


# --------------------------------------------------------------------------
# reports and plot series

def write_json(path, doc):
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path):
    return _read_json(path)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return value


def read_rows(path) -> Tuple[List[str], List[List[str]]]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        return header, [row for row in reader]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
