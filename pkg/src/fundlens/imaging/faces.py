"""Frontal upright face counting with a stump-cascade detector.

The cascade file format is the de facto XML layout used by published
pre-trained frontal-face detectors (``type_id="opencv-haar-classifier"``,
stump weak classifiers over Haar-like rectangle features), so a user-supplied
standard cascade loads unmodified.  The bundled cascade was trained offline
on procedural face patches (see scripts/train_face_cascade.py).

Detection slides a fixed base window over an image pyramid (scale factor 1.1,
step 2 px), evaluates stages on variance-normalized windows via integral
images, and merges raw hits by IoU >= 0.3 grouping with a minimum of 3
detections per cluster.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import CascadeFormatError
from .core import ImageBuffer, _resize_plane, to_grayscale

PYRAMID_SCALE = 1.1
WINDOW_STEP = 2
GROUP_IOU = 0.3
MIN_NEIGHBORS = 3


@dataclass(frozen=True)
class HaarRect:
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass(frozen=True)
class WeakClassifier:
    rects: tuple[HaarRect, ...]
    threshold: float
    left_val: float
    right_val: float


@dataclass(frozen=True)
class CascadeStage:
    threshold: float
    classifiers: tuple[WeakClassifier, ...]


@dataclass(frozen=True)
class CascadeClassifier:
    window_w: int
    window_h: int
    stages: tuple[CascadeStage, ...]

    def __post_init__(self):
        if not self.stages:
            raise CascadeFormatError("cascade has no stages")
        for si, stage in enumerate(self.stages):
            if not stage.classifiers:
                raise CascadeFormatError(f"stage {si} has no weak classifiers")
            for wi, weak in enumerate(stage.classifiers):
                for r in weak.rects:
                    if (
                        r.x < 0
                        or r.y < 0
                        or r.w <= 0
                        or r.h <= 0
                        or r.x + r.w > self.window_w
                        or r.y + r.h > self.window_h
                    ):
                        raise CascadeFormatError(
                            f"stage {si} classifier {wi}: rect "
                            f"({r.x},{r.y},{r.w},{r.h}) exceeds "
                            f"{self.window_w}x{self.window_h} window"
                        )


class FaceDetections(NamedTuple):
    count: int
    boxes: list[tuple[float, float, float, float]]  # (x, y, w, h) in input pixels


def load_cascade(path) -> CascadeClassifier:
    """Parse a stump-cascade XML file, validating invariants."""
    try:
        tree = ET.parse(path)
    except (ET.ParseError, OSError) as exc:
        raise CascadeFormatError(f"cannot parse cascade file {path}: {exc}") from exc
    root = None
    for el in tree.getroot():
        if el.get("type_id") == "opencv-haar-classifier":
            root = el
            break
    if root is None:
        raise CascadeFormatError(
            f"{path}: no element with type_id='opencv-haar-classifier'"
        )
    size_el = root.find("size")
    if size_el is None or size_el.text is None:
        raise CascadeFormatError(f"{path}: missing <size>")
    try:
        win_w, win_h = (int(v) for v in size_el.text.split())
    except ValueError as exc:
        raise CascadeFormatError(f"{path}: bad <size> '{size_el.text}'") from exc

    stages = []
    stages_el = root.find("stages")
    if stages_el is None:
        raise CascadeFormatError(f"{path}: missing <stages>")
    for si, stage_el in enumerate(stages_el):
        thr_el = stage_el.find("stage_threshold")
        if thr_el is None:
            raise CascadeFormatError(f"{path}: stage {si} missing <stage_threshold>")
        classifiers = []
        trees_el = stage_el.find("trees")
        if trees_el is None:
            raise CascadeFormatError(f"{path}: stage {si} missing <trees>")
        for ti, tree_el in enumerate(trees_el):
            nodes = list(tree_el)
            if len(nodes) != 1:
                raise CascadeFormatError(
                    f"{path}: stage {si} tree {ti} is not a stump "
                    f"({len(nodes)} nodes); only stump cascades are supported"
                )
            node = nodes[0]
            if node.find("left_node") is not None or node.find("right_node") is not None:
                raise CascadeFormatError(
                    f"{path}: stage {si} tree {ti} has child nodes; "
                    "only stump cascades are supported"
                )
            feature = node.find("feature")
            if feature is None:
                raise CascadeFormatError(f"{path}: stage {si} tree {ti} missing feature")
            tilted = feature.findtext("tilted", "0").strip()
            if tilted not in ("0", "0."):
                raise CascadeFormatError(
                    f"{path}: stage {si} tree {ti} uses a tilted feature "
                    "(unsupported)"
                )
            rects = []
            for rect_el in feature.find("rects") or ():
                parts = (rect_el.text or "").split()
                if len(parts) != 5:
                    raise CascadeFormatError(
                        f"{path}: stage {si} tree {ti} bad rect '{rect_el.text}'"
                    )
                x, y, w, h = (int(float(p)) for p in parts[:4])
                rects.append(HaarRect(x=x, y=y, w=w, h=h, weight=float(parts[4])))
            if not rects:
                raise CascadeFormatError(f"{path}: stage {si} tree {ti} has no rects")
            classifiers.append(
                WeakClassifier(
                    rects=tuple(rects),
                    threshold=float(node.findtext("threshold")),
                    left_val=float(node.findtext("left_val")),
                    right_val=float(node.findtext("right_val")),
                )
            )
        stages.append(
            CascadeStage(threshold=float(thr_el.text), classifiers=tuple(classifiers))
        )
    return CascadeClassifier(window_w=win_w, window_h=win_h, stages=tuple(stages))


def save_cascade(cascade: CascadeClassifier, path, name="frontal_face_cascade") -> None:
    """Write a cascade in the same XML layout load_cascade reads."""
    lines = ['<?xml version="1.0"?>', "<opencv_storage>"]
    lines.append(f'<{name} type_id="opencv-haar-classifier">')
    lines.append(f"  <size>{cascade.window_w} {cascade.window_h}</size>")
    lines.append("  <stages>")
    for stage in cascade.stages:
        lines.append("    <_>")
        lines.append("      <trees>")
        for weak in stage.classifiers:
            lines.append("        <_>")
            lines.append("          <_>")
            lines.append("            <feature>")
            lines.append("              <rects>")
            for r in weak.rects:
                lines.append(
                    f"                <_>{r.x} {r.y} {r.w} {r.h} {r.weight!r}</_>"
                )
            lines.append("              </rects>")
            lines.append("              <tilted>0</tilted>")
            lines.append("            </feature>")
            lines.append(f"            <threshold>{weak.threshold!r}</threshold>")
            lines.append(f"            <left_val>{weak.left_val!r}</left_val>")
            lines.append(f"            <right_val>{weak.right_val!r}</right_val>")
            lines.append("          </_>")
            lines.append("        </_>")
        lines.append("      </trees>")
        lines.append(f"      <stage_threshold>{stage.threshold!r}</stage_threshold>")
        lines.append("      <parent>-1</parent>")
        lines.append("      <next>-1</next>")
        lines.append("    </_>")
    lines.append("  </stages>")
    lines.append(f"</{name}>")
    lines.append("</opencv_storage>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _integral_pair(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = plane.shape
    ii = np.zeros((h + 1, w + 1))
    sq = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(plane, axis=0), axis=1, out=ii[1:, 1:])
    np.cumsum(np.cumsum(plane * plane, axis=0), axis=1, out=sq[1:, 1:])
    return ii, sq


def _eval_windows(
    plane: np.ndarray, cascade: CascadeClassifier, step: int
) -> np.ndarray:
    """Evaluate every window position at one pyramid level.

    Returns an (n, 2) array of surviving top-left (y, x) positions.
    """
    h, w = plane.shape
    ww, wh = cascade.window_w, cascade.window_h
    if h < wh or w < ww:
        return np.empty((0, 2), dtype=int)
    ii, sq = _integral_pair(plane)
    ys = np.arange(0, h - wh + 1, step)
    xs = np.arange(0, w - ww + 1, step)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    y = gy.ravel()
    x = gx.ravel()
    area = float(ww * wh)

    def rsum(yy, xx, rx, ry, rw, rh):
        y0, x0 = yy + ry, xx + rx
        y1, x1 = y0 + rh, x0 + rw
        return ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]

    total = (
        ii[y + wh, x + ww] - ii[y, x + ww] - ii[y + wh, x] + ii[y, x]
    )
    total_sq = (
        sq[y + wh, x + ww] - sq[y, x + ww] - sq[y + wh, x] + sq[y, x]
    )
    mean = total / area
    var = total_sq / area - mean * mean
    sigma = np.where(var > 0, np.sqrt(np.maximum(var, 0)), 1.0)

    alive = np.ones(len(y), dtype=bool)
    for stage in cascade.stages:
        if not alive.any():
            break
        ay, ax = y[alive], x[alive]
        asig = sigma[alive]
        stage_sum = np.zeros(len(ay))
        for weak in stage.classifiers:
            f = np.zeros(len(ay))
            for r in weak.rects:
                f += r.weight * rsum(ay, ax, r.x, r.y, r.w, r.h)
            f /= area
            stage_sum += np.where(
                f < weak.threshold * asig, weak.left_val, weak.right_val
            )
        alive[np.nonzero(alive)[0][stage_sum < stage.threshold]] = False
    return np.stack([y[alive], x[alive]], axis=1)


def _iou(a, b) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix0 = max(ax0, bx0)
    iy0 = max(ay0, by0)
    ix1 = min(ax0 + aw, bx0 + bw)
    iy1 = min(ay0 + ah, by0 + bh)
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _group_detections(raw, min_neighbors: int):
    """Union-find clustering of boxes with IoU >= GROUP_IOU; clusters smaller
    than min_neighbors are dropped; survivors are averaged."""
    n = len(raw)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _iou(raw[i], raw[j]) >= GROUP_IOU:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    boxes = []
    for members in clusters.values():
        if len(members) < min_neighbors:
            continue
        arr = np.array([raw[i] for i in members])
        boxes.append(tuple(arr.mean(axis=0)))
    boxes.sort()
    return boxes


def detect_faces(
    img: ImageBuffer,
    cascade: CascadeClassifier,
    scale_factor: float = PYRAMID_SCALE,
    step: int = WINDOW_STEP,
    min_neighbors: int = MIN_NEIGHBORS,
) -> FaceDetections:
    """Count frontal upright faces; deterministic for fixed image + cascade."""
    plane = to_grayscale(img).data
    raw = []
    scale = 1.0
    level = plane
    while level.shape[0] >= cascade.window_h and level.shape[1] >= cascade.window_w:
        for y, x in _eval_windows(level, cascade, step):
            raw.append(
                (
                    x * scale,
                    y * scale,
                    cascade.window_w * scale,
                    cascade.window_h * scale,
                )
            )
        scale *= scale_factor
        nh = int(round(plane.shape[0] / scale))
        nw = int(round(plane.shape[1] / scale))
        if nh < cascade.window_h or nw < cascade.window_w:
            break
        level = _resize_plane(plane, nh, nw)
    boxes = _group_detections(raw, min_neighbors)
    return FaceDetections(count=len(boxes), boxes=boxes)
