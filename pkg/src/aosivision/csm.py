"""Cloud-system body-pose search over binary foreground masks.

Each body part becomes a cloud image built from an initial labeled mask:
the part eroded by ``rho`` is *object*, the ring out to the part dilated by
``rho`` is *uncertainty*, the rest is *background*. The clouds hang off a
2D stickman arranged as a tree rooted at the torso. A frame is matched by
placing the parts top-down: the torso over a translation/rotation/scale
grid, then every child over rotation/scale about the joint it shares with
its already placed parent.

A placement is scored by delineating the observed foreground inside the
uncertainty ring. The score is the part of the expected silhouette that is
confirmed by foreground, relative to the expected silhouette plus the
delineated foreground that spills past it::

    score = |E & F| / (|E| + |O & F|)

``E`` is the transformed part region and ``O`` the transformed outer half
of the uncertainty ring (model background only), so the score is 1 for a
perfect fit, 0 on pure background, and decreases as the silhouette slides
inside its ring. During the search, foreground already covered by parts
placed earlier is not charged to ``O``, so touching limbs do not push each
other away.

Coordinates are (x, y) = (column, row) in pixels with y pointing down, and
positive rotations turn clockwise on screen.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .asymmetry import JOINTS, Skeleton2D
from .errors import (
    DegenerateCloud,
    EmptyMask,
    EmptyPart,
    JointOutsidePart,
    MissingPart,
)

PARTS = (
    "torso", "head",
    "l_upper_arm", "l_forearm", "r_upper_arm", "r_forearm",
    "l_thigh", "l_shank", "r_thigh", "r_shank",
)
# PGM palette of the initial labeled mask; 0 is background
PART_LABELS = {name: i + 1 for i, name in enumerate(PARTS)}

PARENT = {
    "head": "torso",
    "l_upper_arm": "torso", "r_upper_arm": "torso",
    "l_thigh": "torso", "r_thigh": "torso",
    "l_forearm": "l_upper_arm", "r_forearm": "r_upper_arm",
    "l_shank": "l_thigh", "r_shank": "r_thigh",
}

# (proximal, distal) stickman joints of every part
PART_JOINTS = {
    "torso": ("neck", "pelvis"),
    "head": ("neck", "head"),
    "l_upper_arm": ("l_shoulder", "l_elbow"),
    "l_forearm": ("l_elbow", "l_wrist"),
    "r_upper_arm": ("r_shoulder", "r_elbow"),
    "r_forearm": ("r_elbow", "r_wrist"),
    "l_thigh": ("l_hip", "l_knee"),
    "l_shank": ("l_knee", "l_ankle"),
    "r_thigh": ("r_hip", "r_knee"),
    "r_shank": ("r_knee", "r_ankle"),
}

# joints whose placement is decided by each part's transform
CARRIED_JOINTS = {
    "torso": ("neck", "pelvis", "l_shoulder", "r_shoulder", "l_hip", "r_hip"),
    "head": ("head",),
    "l_upper_arm": ("l_elbow",),
    "l_forearm": ("l_wrist",),
    "r_upper_arm": ("r_elbow",),
    "r_forearm": ("r_wrist",),
    "l_thigh": ("l_knee",),
    "l_shank": ("l_ankle",),
    "r_thigh": ("r_knee",),
    "r_shank": ("r_ankle",),
}

BACKGROUND, UNCERTAINTY, OBJECT = 0, 1, 2


def _children(part):
    return [c for c in PARTS if PARENT.get(c) == part]


def _dfs_order():
    order = []

    def visit(p):
        order.append(p)
        for c in _children(p):
            visit(c)

    visit("torso")
    return tuple(order)


SEARCH_ORDER = _dfs_order()


# --------------------------------------------------------------------------
# affine helpers: 2x3 matrices acting on column vectors (x, y)

def _identity():
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _similarity(rotation_deg, scale, pivot, translation=(0.0, 0.0)):
    """p -> pivot + translation + scale * R (p - pivot)."""
    th = math.radians(rotation_deg)
    c, s = math.cos(th), math.sin(th)
    if rotation_deg == 0:
        c, s = 1.0, 0.0
    a = scale * np.array([[c, -s], [s, c]])
    px, py = pivot
    b = np.array([px + translation[0], py + translation[1]]) - a @ np.array([px, py])
    return np.hstack([a, b[:, None]])


def _compose(outer, inner):
    """Affine ``outer o inner``."""
    a = outer[:, :2] @ inner[:, :2]
    b = outer[:, :2] @ inner[:, 2] + outer[:, 2]
    return np.hstack([a, b[:, None]])


def apply_affine(m, point):
    x, y = point
    return (float(m[0, 0] * x + m[0, 1] * y + m[0, 2]),
            float(m[1, 0] * x + m[1, 1] * y + m[1, 2]))


# --------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class PartTransform:
    rotation: float = 0.0
    scale: float = 1.0
    translation: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def local_affine(self, pivot):
        return _similarity(self.rotation, self.scale, pivot, self.translation)


IDENTITY = PartTransform()


@dataclass(eq=False)
class CloudImage:
    """Tri-valued cloud of one part, in model (initial-frame) coordinates."""

    part_id: str
    grid: np.ndarray          # uint8, BACKGROUND / UNCERTAINTY / OBJECT
    expected: np.ndarray      # bool, the part region the cloud was built from
    penalty: np.ndarray       # bool, outer uncertainty on model background
    anchor: Tuple[float, float]

    def __post_init__(self):
        # code image used by the warper: 1 = expected silhouette, 2 = penalty ring
        code = np.zeros(self.grid.shape, dtype=np.uint8)
        code[self.penalty] = 2
        code[self.expected] = 1
        self._code = code
        rows, cols = np.nonzero(code)
        self._bbox = (rows.min(), rows.max(), cols.min(), cols.max())

    @property
    def object(self):
        return self.grid == OBJECT

    @property
    def uncertainty(self):
        return self.grid == UNCERTAINTY

    @property
    def background(self):
        return self.grid == BACKGROUND


@dataclass(eq=False)
class CloudSystemModel:
    clouds: Dict[str, CloudImage]
    stickman: Dict[str, Tuple[float, float]]
    shape: Tuple[int, int]
    rho: int
    parent: Mapping[str, str] = field(default_factory=lambda: dict(PARENT))

    def cloud(self, part) -> CloudImage:
        return self.clouds[part]


@dataclass(frozen=True)
class PoseGrid:
    t_max: int = 10
    t_step: int = 1
    r_max: float = 30.0
    r_step: float = 5.0
    scales: Tuple[float, ...] = (0.9, 1.0, 1.1)

    def __post_init__(self):
        if self.t_step < 1 or int(self.t_step) != self.t_step:
            raise ValueError("t_step must be a positive integer")
        if self.t_max < 0 or self.r_max < 0 or self.r_step <= 0:
            raise ValueError("grid extents must be non-negative with positive steps")
        if not self.scales or min(self.scales) <= 0:
            raise ValueError("scales must be positive")

    def translation_offsets(self):
        k = int(self.t_max // self.t_step)
        return [i * int(self.t_step) for i in range(-k, k + 1)]

    def rotation_offsets(self):
        k = int(math.floor(self.r_max / self.r_step + 1e-9))
        return [i * self.r_step for i in range(-k, k + 1)]


@dataclass(frozen=True)
class PoseSearchResult:
    transforms: Dict[str, PartTransform]
    part_scores: Dict[str, float]
    skeleton: Skeleton2D
    held: bool = False

    @property
    def score(self) -> float:
        """Mean part score."""
        return float(np.mean([self.part_scores[p] for p in PARTS]))


# --------------------------------------------------------------------------
# building

def _part_label(part_id: Union[str, int]) -> int:
    if isinstance(part_id, str):
        return PART_LABELS[part_id]
    return int(part_id)


def _part_name(part_id: Union[str, int]) -> str:
    if isinstance(part_id, str):
        return part_id
    for name, label in PART_LABELS.items():
        if label == part_id:
            return name
    return str(part_id)


_SQUARE = np.ones((3, 3), dtype=bool)


def _erode(mask, rho):
    if rho == 0:
        return mask.copy()
    return ndimage.binary_erosion(mask, _SQUARE, iterations=rho, border_value=0)


def _dilate(mask, rho):
    if rho == 0:
        return mask.copy()
    return ndimage.binary_dilation(mask, _SQUARE, iterations=rho)


def build_cloud(labeled_mask: np.ndarray, part_id, rho: int,
                anchor: Tuple[float, float] = (0.0, 0.0)) -> CloudImage:
    """Cloud image of one labeled part, with a band of ``rho`` pixels.

    Erosion and dilation use a (2 rho + 1)-square structuring element.
    """
    labeled_mask = np.asarray(labeled_mask)
    if rho < 0 or int(rho) != rho:
        raise ValueError("rho must be a non-negative integer")
    rho = int(rho)
    region = labeled_mask == _part_label(part_id)
    name = _part_name(part_id)
    if not region.any():
        raise EmptyPart(f"no pixels labeled {name}")
    obj = _erode(region, rho)
    if not obj.any():
        raise DegenerateCloud(f"{name}: erosion by {rho} px empties the part")
    outer = _dilate(region, rho)
    grid = np.zeros(region.shape, dtype=np.uint8)
    grid[outer] = UNCERTAINTY
    grid[obj] = OBJECT
    penalty = outer & (labeled_mask == 0)
    return CloudImage(name, grid, region, penalty, (float(anchor[0]), float(anchor[1])))


def _inside(mask, point):
    x, y = point
    c, r = int(math.floor(x + 0.5)), int(math.floor(y + 0.5))
    return 0 <= r < mask.shape[0] and 0 <= c < mask.shape[1] and bool(mask[r, c])


def build_csm(labeled_mask: np.ndarray, stickman: Mapping[str, Sequence[float]],
              rho: int = 3) -> CloudSystemModel:
    """Clouds for all ten parts plus the torso-rooted tree.

    Every joint must fall inside the cloud support (dilated by one pixel) of
    at least one part it belongs to, since parts sharing a joint paint over
    each other there.
    """
    labeled_mask = np.asarray(labeled_mask)
    stickman = {k: (float(v[0]), float(v[1])) for k, v in stickman.items()}
    missing_joints = [j for j in JOINTS if j not in stickman]
    if missing_joints:
        raise JointOutsidePart(f"stickman lacks joints {missing_joints}")
    present = set(np.unique(labeled_mask).tolist())
    for part in PARTS:
        if PART_LABELS[part] not in present:
            raise MissingPart(f"labeled mask has no {part} (label {PART_LABELS[part]})")

    clouds = {}
    for part in PARTS:
        proximal = PART_JOINTS[part][0]
        clouds[part] = build_cloud(labeled_mask, part, rho, stickman[proximal])

    supports = {p: _dilate(c.grid != BACKGROUND, 1) for p, c in clouds.items()}
    for joint in JOINTS:
        owners = [p for p in PARTS
                  if joint in PART_JOINTS[p] or joint in CARRIED_JOINTS[p]]
        if not any(_inside(supports[p], stickman[joint]) for p in owners):
            raise JointOutsidePart(f"{joint} lies outside the {'/'.join(owners)} region")
    for child, parent in PARENT.items():
        if PART_JOINTS[child][0] not in CARRIED_JOINTS[parent] + PART_JOINTS[parent]:
            raise JointOutsidePart(f"{child} does not attach to a joint of {parent}")
    return CloudSystemModel(clouds, stickman, labeled_mask.shape, int(rho))


# --------------------------------------------------------------------------
# scoring

def _warp(cloud: CloudImage, world: np.ndarray):
    """Pixels of the expected silhouette and penalty ring after ``world``.

    Nearest-neighbour inverse mapping over the bounding box of the mapped
    support. Returns ``(e_rows, e_cols, p_rows, p_cols)``; coordinates may
    fall outside the image.
    """
    r0, r1, c0, c1 = cloud._bbox
    corners = [(c0 - 0.5, r0 - 0.5), (c1 + 0.5, r0 - 0.5),
               (c0 - 0.5, r1 + 0.5), (c1 + 0.5, r1 + 0.5)]
    mapped = np.array([apply_affine(world, p) for p in corners])
    x0, y0 = np.floor(mapped.min(axis=0)).astype(int) - 1
    x1, y1 = np.ceil(mapped.max(axis=0)).astype(int) + 1

    a = world[:, :2]
    inv = np.linalg.inv(a)
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    gx, gy = np.meshgrid(xs - world[0, 2], ys - world[1, 2])
    sx = np.floor(inv[0, 0] * gx + inv[0, 1] * gy + 0.5).astype(int)
    sy = np.floor(inv[1, 0] * gx + inv[1, 1] * gy + 0.5).astype(int)

    h, w = cloud._code.shape
    ok = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    code = np.zeros(sx.shape, dtype=np.uint8)
    code[ok] = cloud._code[sy[ok], sx[ok]]
    er, ec = np.nonzero(code == 1)
    pr, pc = np.nonzero(code == 2)
    return er + y0, ec + x0, pr + y0, pc + x0


def _hits(foreground, rows, cols):
    h, w = foreground.shape
    ok = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    return int(foreground[rows[ok], cols[ok]].sum())


def _ratio(e_hits, e_count, p_hits):
    if e_count == 0:
        return 0.0
    return e_hits / (e_count + p_hits)


def delineation_score(cloud: CloudImage, transform: PartTransform,
                      observed_mask: np.ndarray,
                      parent_world: Optional[np.ndarray] = None,
                      explained: Optional[np.ndarray] = None) -> float:
    """Fit of ``cloud`` placed by ``transform`` against a binary mask, in [0, 1].

    ``transform`` acts about the cloud anchor in the parent's frame;
    ``parent_world`` is the parent's model-to-image affine (identity for the
    root). Foreground flagged in ``explained`` (silhouettes of parts placed
    earlier) is not charged to the penalty ring.
    """
    foreground = np.asarray(observed_mask, dtype=bool)
    leftover = foreground if explained is None else foreground & ~explained
    world = transform.local_affine(cloud.anchor)
    if parent_world is not None:
        world = _compose(parent_world, world)
    er, ec, pr, pc = _warp(cloud, world)
    return _ratio(_hits(foreground, er, ec), er.size, _hits(leftover, pr, pc))


# --------------------------------------------------------------------------
# search

def _tie_key(score, dx, dy, rotation, scale):
    return (-score, math.hypot(dx, dy), abs(rotation), abs(scale - 1.0),
            dx, dy, rotation, scale)


def _search_root(cloud, foreground, prediction, grid):
    base_t = (int(round(prediction.translation[0])), int(round(prediction.translation[1])))
    offsets = np.array(grid.translation_offsets())
    dxs, dys = np.meshgrid(offsets, offsets, indexing="ij")
    dxs, dys = dxs.ravel(), dys.ravel()
    h, w = foreground.shape

    def count(rows, cols):
        rr = rows[None, :] + dys[:, None]
        cc = cols[None, :] + dxs[:, None]
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        vals = np.zeros(rr.shape, dtype=bool)
        vals[ok] = foreground[rr[ok], cc[ok]]
        return vals.sum(axis=1)

    best = None
    for d_rot, scale in itertools.product(grid.rotation_offsets(), grid.scales):
        rotation = prediction.rotation + d_rot
        t0 = PartTransform(rotation, scale, (float(base_t[0]), float(base_t[1])))
        er, ec, pr, pc = _warp(cloud, t0.local_affine(cloud.anchor))
        e_hits = count(er, ec)
        p_hits = count(pr, pc)
        for i in range(len(dxs)):
            score = _ratio(int(e_hits[i]), er.size, int(p_hits[i]))
            key = _tie_key(score, int(dxs[i]), int(dys[i]), d_rot, scale)
            if best is None or key < best[0]:
                t = (float(base_t[0] + dxs[i]), float(base_t[1] + dys[i]))
                best = (key, PartTransform(rotation, scale, t), score)
    return best[1], best[2]


def _search_child(cloud, foreground, parent_world, grid, explained):
    best = None
    for rotation, scale in itertools.product(grid.rotation_offsets(), grid.scales):
        t = PartTransform(rotation, scale)
        score = delineation_score(cloud, t, foreground, parent_world, explained)
        key = _tie_key(score, 0, 0, rotation, scale)
        if best is None or key < best[0]:
            best = (key, t, score)
    return best[1], best[2]


def world_transforms(csm: CloudSystemModel,
                     transforms: Mapping[str, PartTransform]) -> Dict[str, np.ndarray]:
    """Model-to-image affine of every part, composed down the tree."""
    worlds = {}
    for part in SEARCH_ORDER:
        local = transforms.get(part, IDENTITY).local_affine(csm.clouds[part].anchor)
        parent = csm.parent.get(part)
        worlds[part] = local if parent is None else _compose(worlds[parent], local)
    return worlds


def pose_skeleton(csm: CloudSystemModel, transforms: Mapping[str, PartTransform]) -> Skeleton2D:
    worlds = world_transforms(csm, transforms)
    joints = {}
    for part, carried in CARRIED_JOINTS.items():
        for joint in carried:
            joints[joint] = apply_affine(worlds[part], csm.stickman[joint])
    return Skeleton2D({j: joints[j] for j in JOINTS})


def search_pose(csm: CloudSystemModel, observed_mask: np.ndarray,
                prediction: PartTransform = IDENTITY,
                grid: PoseGrid = PoseGrid()) -> PoseSearchResult:
    """Place all parts top-down, keeping each part's best-scoring transform.

    The torso is searched over integer translations around the rounded
    predicted translation, rotations around the predicted rotation and the
    absolute scale set; every other part over rotation x scale about its
    proximal joint. Ties go to the smallest deviation from the prediction.
    """
    foreground = np.asarray(observed_mask, dtype=bool)
    if not foreground.any():
        raise EmptyMask("observed mask has no foreground")

    transforms = {}
    scores = {}
    worlds = {}
    explained = np.zeros_like(foreground)
    for part in SEARCH_ORDER:
        cloud = csm.clouds[part]
        parent = csm.parent.get(part)
        if parent is None:
            t, s = _search_root(cloud, foreground, prediction, grid)
            worlds[part] = t.local_affine(cloud.anchor)
        else:
            t, s = _search_child(cloud, foreground, worlds[parent], grid, explained)
            worlds[part] = _compose(worlds[parent], t.local_affine(cloud.anchor))
        transforms[part] = t
        scores[part] = s
        _paint(explained, cloud, worlds[part])
    return PoseSearchResult(transforms, scores, pose_skeleton(csm, transforms))


def _paint(canvas, cloud, world):
    er, ec, _, _ = _warp(cloud, world)
    ok = (er >= 0) & (er < canvas.shape[0]) & (ec >= 0) & (ec < canvas.shape[1])
    canvas[er[ok], ec[ok]] = True


def explained_before(csm: CloudSystemModel, transforms: Mapping[str, PartTransform],
                     part: str, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Silhouettes of the parts placed before ``part`` in search order."""
    canvas = np.zeros(shape or csm.shape, dtype=bool)
    worlds = world_transforms(csm, transforms)
    for p in SEARCH_ORDER[:SEARCH_ORDER.index(part)]:
        _paint(canvas, csm.clouds[p], worlds[p])
    return canvas


def _centroid(mask):
    rows, cols = np.nonzero(mask)
    return float(cols.mean()), float(rows.mean())


def track_sequence(csm: CloudSystemModel, masks: Sequence[np.ndarray],
                   grid: PoseGrid = PoseGrid(),
                   corrections: Optional[Mapping[int, Tuple[np.ndarray, Mapping]]] = None
                   ) -> List[PoseSearchResult]:
    """Pose search frame by frame.

    Each frame is searched around the previous torso transform shifted by
    the displacement of the foreground centroid. Empty frames repeat the
    previous pose with ``held=True``. ``corrections`` maps a frame index to
    a replacement ``(labeled_mask, stickman)``. The model is rebuilt from it
    at that frame and the search restarts around identity.
    """
    if len(masks) == 0:
        raise ValueError("need at least one mask")
    corrections = dict(corrections or {})
    results: List[PoseSearchResult] = []
    previous_mask = None
    prediction = IDENTITY
    for t, mask in enumerate(masks):
        foreground = np.asarray(mask, dtype=bool)
        if t in corrections:
            labeled, stickman = corrections[t]
            csm = build_csm(labeled, stickman, csm.rho)
            prediction = IDENTITY
            previous_mask = None
        if not foreground.any():
            if results:
                last = results[-1]
                results.append(PoseSearchResult(last.transforms, last.part_scores,
                                                last.skeleton, held=True))
            else:
                ident = {p: IDENTITY for p in PARTS}
                results.append(PoseSearchResult(ident, {p: 0.0 for p in PARTS},
                                                pose_skeleton(csm, ident), held=True))
            continue
        if previous_mask is not None:
            (x0, y0), (x1, y1) = _centroid(previous_mask), _centroid(foreground)
            tx, ty = prediction.translation
            prediction = PartTransform(prediction.rotation, prediction.scale,
                                       (tx + x1 - x0, ty + y1 - y0))
        result = search_pose(csm, foreground, prediction, grid)
        results.append(result)
        prediction = result.transforms["torso"]
        previous_mask = foreground
    return results


def posed_mask(csm: CloudSystemModel, transforms: Mapping[str, PartTransform],
               shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Union of the transformed part silhouettes, as a binary mask."""
    out = np.zeros(shape or csm.shape, dtype=bool)
    worlds = world_transforms(csm, transforms)
    for part in PARTS:
        _paint(out, csm.clouds[part], worlds[part])
    return out
