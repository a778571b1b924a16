"""Command-line interface.

::

    aosivision attention disengage --landmarks L.csv --annotation A.json --out-dir OUT
    aosivision attention track     --landmarks L.csv --annotation A.json --out-dir OUT
    aosivision attention ball      --landmarks L.csv --annotation A.json --out-dir OUT
    aosivision gait analyze --skeletons S.csv --out-dir OUT
    aosivision pose track --masks DIR --labeled-mask M.pgm --stickman J.json --out-dir OUT
    aosivision fuse --landmarks L.csv --out-dir OUT
    aosivision demo --out-dir OUT

Every command writes ``report.json``, a per-frame CSV series and, unless
``--no-figures`` is given, PNG figures into ``--out-dir``. Outputs are
staged and only moved into place when the command succeeds.

Exit status: 0 success, 2 malformed input or configuration, 3 analysis
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import shutil
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import io as aio
from .asymmetry import asymmetry_frame, dynamic_symmetry, static_symmetry, window_length
from .attention import classify_tracking, detect_disengagement, shared_interest_latency
from .config import SessionConfig, load_config
from .csm import PARTS, build_csm, track_sequence
from .errors import AnalysisError, ConfigError, InputError
from .fusion import fuse_sequence
from .geometry_head import head_signal

EXIT_OK, EXIT_INPUT, EXIT_ANALYSIS = 0, 2, 3

# flag name -> config field
OVERRIDES = {
    "delta": float, "k": int, "eps": float, "pause_s": float, "eta": float,
    "delta_p": float, "baseline_s": float, "min_excursion": float,
    "tau": float, "sigma": float, "detector_threshold": float,
    "t_max": int, "r_max": float, "r_step": float, "rho": int,
}


def _to_builtin(value):
    if dataclasses.is_dataclass(value):
        return {k: _to_builtin(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    return value


class Run:
    """Staging directory for one command's outputs."""

    def __init__(self, out_dir, figures=True):
        self.out_dir = Path(out_dir)
        self.figures = figures
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        self.written: List[str] = []

    def path(self, name):
        self.written.append(name)
        return self.stage / name

    def directory(self, name):
        self.written.append(name)
        path = self.stage / name
        path.mkdir()
        return path

    def commit(self):
        for name in self.written:
            target = self.out_dir / name
            if target.is_dir():
                shutil.rmtree(target)
            shutil.move(str(self.stage / name), str(target))
        shutil.rmtree(self.stage, ignore_errors=True)

    def abort(self):
        shutil.rmtree(self.stage, ignore_errors=True)


def _report(command, cfg: SessionConfig, inputs, results, events=None):
    return {
        "tool": "aosivision",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "results": _to_builtin(results),
        "events": _to_builtin(events or {}),
    }


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {' '.join(missing)}")


# --------------------------------------------------------------------------
# attention

def _load_signal(path, fps, cfg):
    with open(path, newline="") as handle:
        header = handle.readline().strip()
    if header == ",".join(aio.FUSED_HEADER):
        frames, state = aio.parse_fused(path), None
    else:
        state, frames = fuse_sequence(aio.parse_landmarks(path), cfg.detector_threshold,
                                      cfg.search_scale)
    return frames, state, head_signal(frames, fps)


def _signal_rows(signal):
    return zip(signal.frame_indices, signal.yaw, signal.pitch_cum, signal.held,
               signal.right_eye_present)


def cmd_attention(args, cfg, run):
    _require(args, "landmarks", "annotation")
    ann = aio.parse_annotation(args.annotation, default_fps=cfg.fps)
    if args.fps is not None:
        ann = dataclasses.replace(ann, fps=float(args.fps))
    frames, state, signal = _load_signal(args.landmarks, ann.fps, cfg)
    params = cfg.attention
    expected = {"disengage": "disengagement", "track": "tracking", "ball": "shared_interest"}
    if ann.task != expected[args.task]:
        raise ConfigError(f"annotation is a {ann.task} trial, not {expected[args.task]}")

    if args.task == "disengage":
        result = detect_disengagement(signal, ann, params)
    elif args.task == "track":
        result = classify_tracking(signal, ann, params)
    else:
        result = shared_interest_latency(signal, ann, params)

    aio.write_rows(run.path("signal.csv"),
                   ["frame", "yaw_hat", "pitch_cum", "held", "right_eye_present"],
                   _signal_rows(signal))
    events = {"held_frames": signal.frame_indices[signal.held]}
    if state is not None:
        events["resets"] = state.reset_events
        events["constraint_violations"] = state.constraint_violations
    trial = {"trial_id": ann.trial_id, "task": ann.task, "fps": ann.fps,
             "n_frames": len(signal)}
    trial.update(_to_builtin(result))
    doc = _report(f"attention {args.task}", cfg,
                  {"landmarks": args.landmarks, "annotation": args.annotation},
                  {"trials": [trial]}, events)
    aio.write_json(run.path("report.json"), doc)

    if run.figures:
        from . import plotting

        idx = signal.frame_indices
        offset = int(idx[0])
        if args.task == "disengage":
            level = result.baseline + (result.threshold if ann.target_side == "right"
                                       else -result.threshold)
            arrival = None if result.arrival_frame is None else result.arrival_frame + offset
            plotting.plot_disengagement(run.path("yaw.png"), idx, signal.yaw,
                                        ann.presentation_frame + offset, ann.fps,
                                        arrival, level)
        elif args.task == "track":
            intervals = [(lab, s + offset, e + offset) for lab, s, e in ann.object_intervals]
            pauses = [(s + offset, c) for s, c in result.pauses]
            plotting.plot_tracking(run.path("yaw.png"), idx, signal.yaw, intervals, pauses)
        else:
            shift = (lambda f: None if f is None else f + offset)
            plotting.plot_pitch(run.path("pitch.png"), idx, signal.pitch_cum,
                                ann.contact_frame + offset, shift(result.look_down_frame),
                                shift(result.look_up_frame))
    return doc


def cmd_fuse(args, cfg, run):
    _require(args, "landmarks")
    state, frames = fuse_sequence(aio.parse_landmarks(args.landmarks),
                                  cfg.detector_threshold, cfg.search_scale)
    aio.write_fused(run.path("fused.csv"), frames)
    fps = args.fps if args.fps is not None else cfg.fps
    signal = head_signal(frames, fps) if len(frames) >= 3 else None
    if signal is not None:
        aio.write_rows(run.path("signal.csv"),
                       ["frame", "yaw_hat", "pitch_cum", "held", "right_eye_present"],
                       _signal_rows(signal))
    results = {"n_frames": len(frames),
               "n_resets": len(state.reset_events),
               "n_constraint_violations": len(state.constraint_violations),
               "right_eye_frames": [f.frame_index for f in frames if f.right_eye_present]}
    doc = _report("fuse", cfg, {"landmarks": args.landmarks}, results,
                  {"resets": state.reset_events,
                   "constraint_violations": state.constraint_violations})
    aio.write_json(run.path("report.json"), doc)
    return doc


# --------------------------------------------------------------------------
# gait and pose

def _asymmetry(frames, skeletons, fps, cfg, run, figure_name="asymmetry.png"):
    rows = []
    for frame, sk in zip(frames, skeletons):
        angles, af = asymmetry_frame(sk, cfg.tau, cfg.sigma)
        rows.append((frame, af, angles))
    flags = [af.asymmetric for _, af, _ in rows]
    aio.write_rows(run.path("asymmetry.csv"),
                   ["frame", "as_star", "ad_f", "f_l", "f_r", "asymmetric"],
                   [(f, af.as_star, af.ad_f, a.f_l, a.f_r, af.asymmetric)
                    for f, af, a in rows])
    summary = {
        "n_frames": len(rows),
        "asymmetric_frames": int(sum(flags)),
        "window_frames": window_length(fps),
        "ss": static_symmetry(flags),
        "ds": dynamic_symmetry(flags, fps),
        "frames": [dict(frame=f, **_to_builtin(af)) for f, af, _ in rows],
    }
    if run.figures:
        from . import plotting

        plotting.plot_asymmetry(run.path(figure_name), [r[0] for r in rows],
                                [r[1].as_star for r in rows], [r[1].ad_f for r in rows],
                                [r[2].f_l for r in rows], [r[2].f_r for r in rows], flags)
    return summary


def cmd_gait(args, cfg, run):
    _require(args, "skeletons")
    frames, skeletons = aio.parse_skeletons(args.skeletons)
    if not frames:
        raise InputError(f"{args.skeletons}: no skeleton rows")
    fps = args.fps if args.fps is not None else cfg.fps
    summary = _asymmetry(frames, skeletons, fps, cfg, run)
    doc = _report("gait analyze", cfg, {"skeletons": args.skeletons},
                  {"asymmetry": summary})
    aio.write_json(run.path("report.json"), doc)
    return doc


def cmd_pose(args, cfg, run):
    _require(args, "masks", "labeled_mask", "stickman")
    names, masks = aio.read_mask_sequence(args.masks)
    labeled = aio.read_pgm(args.labeled_mask)
    stickman = aio.read_stickman(args.stickman)
    csm = build_csm(labeled, stickman, int(cfg.rho))
    for name, m in zip(names, masks):
        if m.shape != csm.shape:
            raise InputError(f"mask {name} is {m.shape}, model is {csm.shape}")
    results = track_sequence(csm, masks, cfg.grid)
    frames = list(range(len(results)))
    skeletons = [r.skeleton for r in results]
    aio.write_skeletons(run.path("skeletons.csv"), frames, skeletons)
    aio.write_rows(run.path("pose.csv"),
                   ["frame", "mask", "score", "held", "torso_dx", "torso_dy",
                    "torso_rotation", "torso_scale"],
                   [(i, n, r.score, r.held, *r.transforms["torso"].translation,
                     r.transforms["torso"].rotation, r.transforms["torso"].scale)
                    for i, (n, r) in enumerate(zip(names, results))])
    fps = args.fps if args.fps is not None else cfg.fps
    summary = _asymmetry(frames, skeletons, fps, cfg, run)
    per_frame = [{"frame": i, "mask": n, "score": r.score, "held": r.held,
                  "transforms": {p: _to_builtin(r.transforms[p]) for p in PARTS}}
                 for i, (n, r) in enumerate(zip(names, results))]
    doc = _report("pose track", cfg,
                  {"masks": args.masks, "labeled_mask": args.labeled_mask,
                   "stickman": args.stickman},
                  {"poses": per_frame, "asymmetry": summary},
                  {"held_frames": [i for i, r in enumerate(results) if r.held]})
    aio.write_json(run.path("report.json"), doc)
    if run.figures:
        from . import plotting

        plotting.plot_skeletons(run.path("skeletons.png"), skeletons, csm.shape, masks[0])
    return doc


# --------------------------------------------------------------------------
# demo inputs

def cmd_demo(args, cfg, run):
    """Write a small set of synthetic input files to try the other commands on."""
    from . import synthetic as syn
    from .attention import TrialAnnotation
    from .csm import PartTransform, posed_mask

    yaw = syn.step_yaw(120, 81, level=-0.5)   # turn 21 frames after presentation
    aio.write_landmarks(run.path("disengage_landmarks.csv"),
                        syn.observations_from_frames(syn.landmark_frames(yaw)))
    aio.write_annotation(run.path("disengage_annotation.json"),
                         TrialAnnotation("disengagement", 30.0, presentation_frame=60,
                                         target_side="left", trial_id="demo"))

    labeled = syn.render_labeled()
    aio.write_pgm(run.path("labeled.pgm"), labeled)
    aio.write_stickman(run.path("stickman.json"), syn.DEFAULT_STICKMAN)
    csm = build_csm(labeled, syn.DEFAULT_STICKMAN, int(cfg.rho))
    masks = run.directory("masks")
    for t in range(4):
        pose = {p: PartTransform() for p in PARTS}
        pose["torso"] = PartTransform(0.0, 1.0, (2.0 * t, 0.0))
        pose["l_forearm"] = PartTransform(-10.0 * t, 1.0)
        aio.write_pgm(masks / f"{t:03d}.pgm", posed_mask(csm, pose))

    frames, skeletons = [], []
    for t in range(30):
        frames.append(t)
        skeletons.append(syn.canonical_skeleton(asymmetric=t >= 15))
    aio.write_skeletons(run.path("skeletons.csv"), frames, skeletons)
    doc = {"tool": "aosivision", "version": __version__, "command": "demo",
           "files": sorted(run.written)}
    return doc


# --------------------------------------------------------------------------

def _common(parser):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--fps", type=float, help="frame rate override")
    parser.add_argument("--out-dir", default="aosivision_out", help="output directory")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    parser.add_argument("--landmarks", help="landmark CSV (raw or fused)")
    parser.add_argument("--annotation", help="trial annotation JSON")
    parser.add_argument("--skeletons", help="skeleton CSV")
    parser.add_argument("--masks", help="directory of binary PGM masks")
    parser.add_argument("--labeled-mask", help="PGM with part labels 1-10")
    parser.add_argument("--stickman", help="stickman joints JSON")
    group = parser.add_argument_group("threshold overrides")
    for name, kind in OVERRIDES.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=f"set_{name}", type=kind,
                           metavar=kind.__name__.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aosivision", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    attention = sub.add_parser("attention", help="score an attention trial")
    attention.add_argument("task", choices=["disengage", "track", "ball"])
    _common(attention)
    attention.set_defaults(func=cmd_attention)

    gait = sub.add_parser("gait", help="arm asymmetry from skeletons")
    gait.add_argument("action", choices=["analyze"])
    _common(gait)
    gait.set_defaults(func=cmd_gait)

    pose = sub.add_parser("pose", help="pose estimation from masks")
    pose.add_argument("action", choices=["track"])
    _common(pose)
    pose.set_defaults(func=cmd_pose)

    fuse = sub.add_parser("fuse", help="landmark tracker/detector fusion only")
    _common(fuse)
    fuse.set_defaults(func=cmd_fuse)

    demo = sub.add_parser("demo", help="write synthetic example inputs")
    _common(demo)
    demo.set_defaults(func=cmd_demo)
    return parser


def _config(args) -> SessionConfig:
    cfg = load_config(args.config)
    changes = {name: getattr(args, f"set_{name}") for name in OVERRIDES
               if getattr(args, f"set_{name}") is not None}
    if args.fps is not None:
        changes["fps"] = args.fps
    return cfg.replace(**changes) if changes else cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run = None
    try:
        cfg = _config(args)
        run = Run(args.out_dir, figures=not args.no_figures)
        args.func(args, cfg, run)
        run.commit()
    except InputError as exc:
        print(f"aosivision: input error: {exc}", file=sys.stderr)
        status = EXIT_INPUT
    except OSError as exc:
        print(f"aosivision: {exc}", file=sys.stderr)
        status = EXIT_INPUT
    except (AnalysisError, ValueError) as exc:
        print(f"aosivision: analysis failed: {exc}", file=sys.stderr)
        status = EXIT_ANALYSIS
    else:
        print(args.out_dir)
        return EXIT_OK
    if run is not None:
        run.abort()
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
