"""Figures for the CLI reports.

Each function draws one figure and writes it to ``path`` (PNG). Figures are
built on an Agg canvas directly, so nothing touches pyplot's global state
and no display is needed.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .csm import PART_JOINTS, PARTS

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
}

_COLORS = {"R": "#f4c7a1", "L": "#a9cce3", "stationary": "#dddddd"}


def _figure(width=6.4, height=3.2, nrows=1):
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(width, height), dpi=100)
        FigureCanvasAgg(fig)
        axes = fig.subplots(nrows, 1, sharex=True, squeeze=False)[:, 0]
    return fig, axes


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png")
    return path


def plot_disengagement(path, frames, yaw, presentation_frame: int, fps: float,
                       arrival_frame: Optional[int] = None, threshold_level=None):
    """Yaw over frames, with the one- and two-second scoring windows shaded."""
    fig, (ax,) = _figure()
    ax.plot(frames, yaw, color="k", label="yaw")
    p = presentation_frame
    ax.axvline(p, color="tab:red", linestyle="--", label="presentation")
    ax.axvspan(p, p + fps, color="tab:green", alpha=0.15, label="1 s")
    ax.axvspan(p + fps, p + 2 * fps, color="tab:orange", alpha=0.15, label="2 s")
    if threshold_level is not None:
        ax.axhline(threshold_level, color="tab:blue", linewidth=0.8, linestyle=":")
    if arrival_frame is not None:
        ax.axvline(arrival_frame, color="tab:blue", label="arrival")
    ax.set_xlabel("frame")
    ax.set_ylabel("yaw")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="best")
    return _save(fig, path)


def plot_tracking(path, frames, yaw, intervals: Sequence, pauses: Sequence = ()):
    """Yaw over frames with the annotated object intervals and detected pauses."""
    fig, (ax,) = _figure()
    seen = set()
    for label, start, end in intervals:
        ax.axvspan(start, end, color=_COLORS.get(label, "#eeeeee"), alpha=0.6,
                   label=None if label in seen else label)
        seen.add(label)
    for i, (start, count) in enumerate(pauses):
        ax.axvspan(start, start + count - 1, facecolor="none", edgecolor="tab:red",
                   hatch="//", label="pause" if i == 0 else None)
    ax.plot(frames, yaw, color="k", label="yaw")
    ax.set_xlabel("frame")
    ax.set_ylabel("yaw")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="best")
    return _save(fig, path)


def plot_pitch(path, frames, pitch, contact_frame: int,
               look_down: Optional[int] = None, look_up: Optional[int] = None):
    fig, (ax,) = _figure()
    ax.plot(frames, pitch, color="k", label="cumulative pitch")
    ax.axvline(contact_frame, color="tab:red", linestyle="--", label="contact")
    if look_down is not None:
        ax.axvline(look_down, color="tab:purple", linestyle=":", label="look down")
    if look_up is not None:
        ax.axvline(look_up, color="tab:blue", label="look up")
    ax.set_xlabel("frame")
    ax.set_ylabel("pitch (px)")
    ax.legend(loc="best")
    return _save(fig, path)


def plot_asymmetry(path, frames, as_star, ad_f, f_l, f_r, asymmetric):
    """Scores, forearm angles and the asymmetric-frame flags, stacked."""
    frames = np.asarray(frames)
    fig, (a0, a1, a2) = _figure(height=5.0, nrows=3)
    a0.plot(frames, as_star, color="k")
    a0.axhline(1.0, color="tab:red", linestyle="--", linewidth=0.8)
    a0.set_ylabel("AS*")
    a0.set_ylim(0, 2)
    a1.plot(frames, f_l, label="left forearm")
    a1.plot(frames, f_r, label="right forearm")
    a1.plot(frames, ad_f, color="k", linestyle=":", label="difference")
    a1.axhline(45.0, color="tab:red", linestyle="--", linewidth=0.8)
    a1.set_ylabel("angle (deg)")
    a1.legend(loc="best")
    a2.fill_between(frames, 0, np.asarray(asymmetric, dtype=float), step="mid",
                    color="tab:red", alpha=0.5)
    a2.set_ylim(0, 1.1)
    a2.set_yticks([0, 1])
    a2.set_ylabel("asymmetric")
    a2.set_xlabel("frame")
    return _save(fig, path)


def plot_skeletons(path, skeletons: Sequence, shape, mask=None, every: int = 1):
    """Skeleton trajectory drawn over the first mask, later frames darker."""
    fig, (ax,) = _figure(width=4.0, height=4.0)
    if mask is not None:
        ax.imshow(np.asarray(mask), cmap="Greys", alpha=0.3, origin="upper")
    n = len(skeletons)
    for i, sk in enumerate(skeletons[::every]):
        shade = 0.2 + 0.8 * (i * every + 1) / max(n, 1)
        for part in PARTS:
            a, b = PART_JOINTS[part]
            (xa, ya), (xb, yb) = sk[a], sk[b]
            ax.plot([xa, xb], [ya, yb], color=(0.1, 0.2, 0.6, shade), linewidth=1.0)
    ax.set_xlim(0, shape[1])
    ax.set_ylim(shape[0], 0)
    ax.set_aspect("equal")
    ax.set_xlabel("x (px)")
    ax.set_ylabel("y (px)")
    return _save(fig, path)
