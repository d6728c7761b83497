"""Composition-category image details: saliency-based placement scores
(diagonal dominance, rule of thirds, physical balance), superpixel color
balance, and segment counting.

Placement scores use normalized pixel coordinates u = x/(w-1), v = y/(h-1)
so the image is treated as a unit square; all distances are normalized by the
unit-square diagonal (or axis length) and negated, so 0 means ideal placement
and more negative means further away.  Degenerate saliency (constant image)
makes the placement scores missing (None).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import FloatPlane, ImageBuffer, integral_image, to_grayscale

SALIENCY_SCALES = (2, 4, 8)

SLIC_DEFAULT_K = 100
SLIC_DEFAULT_COMPACTNESS = 10.0
SLIC_ITERATIONS = 10

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


@dataclass(frozen=True)
class SaliencyMap:
    plane: FloatPlane  # values in [0, 1]; max = 1 unless identically 0
    threshold: float  # binarization level for the salient region

    @property
    def degenerate(self) -> bool:
        return float(self.plane.data.max()) <= 0.0

    def salient_mask(self) -> np.ndarray:
        return self.plane.data >= self.threshold


class SuperpixelLabels(NamedTuple):
    labels: np.ndarray  # per-pixel cluster id, 0..k_actual-1
    k_actual: int


@dataclass(frozen=True)
class CompositionFeatures:
    diagonal_dominance: float | None
    rule_of_thirds: float | None
    balance_vertical: float | None
    balance_horizontal: float | None
    color_balance_vertical: float
    color_balance_horizontal: float
    n_segments: int


class OtsuResult(NamedTuple):
    level: int
    degenerate: bool


def _window_mean(ii: FloatPlane, radius: int, h: int, w: int) -> np.ndarray:
    """Mean over a (2r+1)-square window clipped to the image, per pixel."""
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - radius, 0, h)[:, None]
    y1 = np.clip(ys + radius + 1, 0, h)[:, None]
    x0 = np.clip(xs - radius, 0, w)[None, :]
    x1 = np.clip(xs + radius + 1, 0, w)[None, :]
    t = ii.data
    total = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
    area = (y1 - y0) * (x1 - x0)
    return total / area


def saliency_map(img: ImageBuffer) -> SaliencyMap:
    """Fine-grained center-surround saliency on the grayscale plane.

    Sum over scales s in {2,4,8} of |mean(window s) - mean(window 4s)|,
    computed with integral images, min-max normalized to [0,1].  The
    threshold is the Otsu level of the saliency histogram.
    """
    gray = to_grayscale(img)
    ii = integral_image(gray)
    h, w = gray.height, gray.width
    acc = np.zeros((h, w), dtype=np.float64)
    for s in SALIENCY_SCALES:
        acc += np.abs(_window_mean(ii, s, h, w) - _window_mean(ii, 4 * s, h, w))
    top = acc.max()
    if top <= 1e-12:
        return SaliencyMap(plane=FloatPlane.from_array(np.zeros((h, w))), threshold=0.0)
    norm = (acc - acc.min()) / (top - acc.min())
    hist = np.bincount(
        np.clip((norm * 255).astype(int).ravel(), 0, 255), minlength=256
    ).astype(np.float64)
    level, _ = otsu_threshold(hist)
    return SaliencyMap(plane=FloatPlane.from_array(norm), threshold=level / 255.0)


def _norm_coords(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """(u, v) grids in [0,1]; single-row/column images map to 0.5."""
    us = np.full(w, 0.5) if w == 1 else np.arange(w) / (w - 1)
    vs = np.full(h, 0.5) if h == 1 else np.arange(h) / (h - 1)
    return np.meshgrid(us, vs)


def diagonal_dominance(sal: SaliencyMap) -> float | None:
    """Mean min-distance of salient pixels to the two diagonals, negated.

    Distances live in the unit square and are normalized by its diagonal
    (sqrt 2), so the attainable range is [-0.25, 0].
    """
    if sal.degenerate:
        return None
    mask = sal.salient_mask()
    if not mask.any():
        return None
    u, v = _norm_coords(sal.plane.height, sal.plane.width)
    d_main = np.abs(u - v) / math.sqrt(2.0)
    d_anti = np.abs(u + v - 1.0) / math.sqrt(2.0)
    d = np.minimum(d_main, d_anti)[mask]
    return float(-d.mean() / math.sqrt(2.0))


THIRDS_POINTS = [(1 / 3, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 1 / 3), (2 / 3, 2 / 3)]


def _weighted_centroid(sal: SaliencyMap) -> tuple[float, float] | None:
    mask = sal.salient_mask()
    weights = sal.plane.data * mask
    total = weights.sum()
    if sal.degenerate or total <= 0:
        return None
    u, v = _norm_coords(sal.plane.height, sal.plane.width)
    return float((u * weights).sum() / total), float((v * weights).sum() / total)


def rule_of_thirds(sal: SaliencyMap) -> float | None:
    """Negated distance of the saliency-weighted centroid to the nearest
    third-line intersection, normalized by the unit-square diagonal."""
    c = _weighted_centroid(sal)
    if c is None:
        return None
    cu, cv = c
    dist = min(math.hypot(cu - pu, cv - pv) for pu, pv in THIRDS_POINTS)
    return -dist / math.sqrt(2.0)


def physical_balance(sal: SaliencyMap, axis: str) -> float | None:
    """-|centroid - center| along one axis; 'vertical' measures the top-bottom
    offset, 'horizontal' the left-right offset.  Range [-0.5, 0]."""
    if axis not in ("vertical", "horizontal"):
        raise ValueError("axis must be 'vertical' or 'horizontal'")
    c = _weighted_centroid(sal)
    if c is None:
        return None
    cu, cv = c
    coord = cv if axis == "vertical" else cu
    return -abs(coord - 0.5)


def _bilinear_sample(rgb: np.ndarray, y: float, x: float) -> np.ndarray:
    h, w = rgb.shape[:2]
    y = min(max(y, 0.0), h - 1.0)
    x = min(max(x, 0.0), w - 1.0)
    y0, x0 = int(math.floor(y)), int(math.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    wy, wx = y - y0, x - x0
    return (
        rgb[y0, x0] * (1 - wy) * (1 - wx)
        + rgb[y0, x1] * (1 - wy) * wx
        + rgb[y1, x0] * wy * (1 - wx)
        + rgb[y1, x1] * wy * wx
    )


def slic_superpixels(
    img: ImageBuffer,
    k: int,
    compactness: float = SLIC_DEFAULT_COMPACTNESS,
    iterations: int = SLIC_ITERATIONS,
) -> SuperpixelLabels:
    """Grid-seeded local k-means over (RGB, position) with distance
    d = d_color + (compactness / S) * d_xy, S = sqrt(N/k); orphan components
    are merged into their largest labeled neighbor afterwards."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if compactness <= 0:
        raise ValueError("compactness must be > 0")
    h, w = img.height, img.width
    n = h * w
    if k > n:
        raise ValueError(f"k={k} exceeds pixel count {n}")
    rgb = img.data.astype(np.float64).reshape(h, w, -1)
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    if k == 1:
        return SuperpixelLabels(labels=np.zeros((h, w), dtype=np.int32), k_actual=1)

    S = math.sqrt(n / k)
    grid_cols = max(1, round(w / S))
    grid_rows = max(1, math.ceil(k / grid_cols))
    centers = []
    for gy in range(grid_rows):
        for gx in range(grid_cols):
            if len(centers) == k:
                break
            # seeds symmetric about the pixel-center midpoint ((h-1)/2, (w-1)/2)
            cy = (gy + 0.5) * h / grid_rows - 0.5
            cx = (gx + 0.5) * w / grid_cols - 0.5
            centers.append((cy, cx))
    centers = np.array(centers)  # may be < k if grid under-fills; k_actual reflects it
    k_eff = len(centers)
    color_centers = np.array(
        [_bilinear_sample(rgb, cy, cx) for cy, cx in centers]
    )

    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    ratio = compactness / S
    labels = np.full((h, w), -1, dtype=np.int32)
    best = np.full((h, w), np.inf)
    for _ in range(iterations):
        best.fill(np.inf)
        labels.fill(-1)
        for ci in range(k_eff):
            cy, cx = centers[ci]
            # ceil/floor window edges mirror consistently, unlike int() truncation
            y0, y1 = max(0, math.ceil(cy - 2 * S)), min(h, math.floor(cy + 2 * S) + 1)
            x0, x1 = max(0, math.ceil(cx - 2 * S)), min(w, math.floor(cx + 2 * S) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            patch = rgb[y0:y1, x0:x1]
            d_color = np.linalg.norm(patch - color_centers[ci], axis=2)
            d_xy = np.hypot(ys[y0:y1, x0:x1] - cy, xs[y0:y1, x0:x1] - cx)
            d = d_color + ratio * d_xy
            better = d < best[y0:y1, x0:x1]
            best[y0:y1, x0:x1][better] = d[better]
            labels[y0:y1, x0:x1][better] = ci
        # pixels outside every search window: assign to nearest center spatially
        orphan = labels < 0
        if orphan.any():
            oy, ox = np.nonzero(orphan)
            d2 = (oy[:, None] - centers[:, 0]) ** 2 + (ox[:, None] - centers[:, 1]) ** 2
            labels[oy, ox] = np.argmin(d2, axis=1)
        for ci in range(k_eff):
            sel = labels == ci
            if not sel.any():
                continue
            centers[ci] = (ys[sel].mean(), xs[sel].mean())
            color_centers[ci] = rgb[sel].mean(axis=0)

    labels = _merge_orphan_components(labels)
    uniq, relabeled = np.unique(labels, return_inverse=True)
    return SuperpixelLabels(
        labels=relabeled.reshape(h, w).astype(np.int32), k_actual=len(uniq)
    )


def _merge_orphan_components(labels: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component per label; merge the rest into
    the largest adjacent component's label."""
    h, w = labels.shape
    comp_ids = np.zeros((h, w), dtype=np.int64)
    next_id = 0
    for lab in np.unique(labels):
        sub, n = ndimage.label(labels == lab, structure=_FOUR_CONNECTED)
        comp_ids[sub > 0] = sub[sub > 0] + next_id
        next_id += n
    sizes = np.bincount(comp_ids.ravel())
    keep = {}
    for lab in np.unique(labels):
        ids = np.unique(comp_ids[labels == lab])
        keep[lab] = ids[np.argmax(sizes[ids])]
    out = labels.copy()
    orphan = np.zeros((h, w), dtype=bool)
    for lab, main_id in keep.items():
        orphan |= (labels == lab) & (comp_ids != main_id)
    # iteratively absorb orphan components into the largest touching kept region
    while orphan.any():
        sub, n = ndimage.label(orphan, structure=_FOUR_CONNECTED)
        progressed = False
        for cid in range(1, n + 1):
            mask = sub == cid
            ring = ndimage.binary_dilation(mask, structure=_FOUR_CONNECTED) & ~mask & ~orphan
            if not ring.any():
                continue
            neigh = out[ring]
            vals, counts = np.unique(neigh, return_counts=True)
            out[mask] = vals[np.argmax(counts)]
            orphan[mask] = False
            progressed = True
        if not progressed:  # whole image orphaned (cannot happen with kept mains)
            break
    return out


def color_balance(img: ImageBuffer, axis: str, k: int = SLIC_DEFAULT_K,
                  compactness: float = SLIC_DEFAULT_COMPACTNESS) -> float:
    """-(mean RGB distance of mirrored pixel pairs) / (255 sqrt 3), after
    replacing pixels by their superpixel mean colors.  'vertical' compares
    top against bottom, 'horizontal' left against right.  0 = balanced,
    -1 = completely unbalanced."""
    if axis not in ("vertical", "horizontal"):
        raise ValueError("axis must be 'vertical' or 'horizontal'")
    h, w = img.height, img.width

    def flip(a):
        return a[::-1] if axis == "vertical" else a[:, ::-1]

    def superpixel_means(image):
        sp = slic_superpixels(image, k=min(k, h * w), compactness=compactness)
        rgb = image.data.astype(np.float64).reshape(h, w, -1)
        if rgb.shape[2] == 1:
            rgb = np.repeat(rgb, 3, axis=2)
        means = np.zeros((sp.k_actual, 3))
        flat = sp.labels.ravel()
        for c in range(3):
            means[:, c] = np.bincount(flat, weights=rgb[:, :, c].ravel()) / np.bincount(flat)
        return means[sp.labels]

    # symmetrize the smoothed field over the axis flip: makes the score exactly
    # mirror-equivariant, so symmetric images score 0 and score(img) == score(flip(img))
    field_fwd = superpixel_means(img)
    field_rev = flip(superpixel_means(ImageBuffer.from_array(flip(img.data).copy())))
    smoothed = 0.5 * (field_fwd + field_rev)

    mirrored = flip(smoothed)
    dist = np.linalg.norm(smoothed - mirrored, axis=2)
    # drop the self-paired center row/column of odd-sized images
    if axis == "vertical" and h % 2 == 1:
        dist = dist[np.arange(h) != h // 2, :]
    elif axis == "horizontal" and w % 2 == 1:
        dist = dist[:, np.arange(w) != w // 2]
    if dist.size == 0:
        return 0.0
    return float(-dist.mean() / (255.0 * math.sqrt(3.0)))


def otsu_threshold(histogram: np.ndarray) -> OtsuResult:
    """Level in [0,255] maximizing between-class variance over a 256-bin
    histogram; class 0 is bins <= level.  Ties break to the smallest level.
    Histograms with a single occupied bin return that bin, flagged degenerate.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    if hist.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    total = hist.sum()
    if total <= 0:
        raise ValueError("histogram must be nonempty")
    occupied = np.nonzero(hist)[0]
    if len(occupied) == 1:
        return OtsuResult(level=int(occupied[0]), degenerate=True)

    p = hist / total
    levels = np.arange(256, dtype=np.float64)
    omega0 = np.cumsum(p)
    mu_cum = np.cumsum(p * levels)
    mu_total = mu_cum[-1]
    omega1 = 1.0 - omega0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = mu_cum / omega0
        mu1 = (mu_total - mu_cum) / omega1
        between = omega0 * omega1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    best = int(np.argmax(between))  # argmax returns the first (smallest) maximizer
    return OtsuResult(level=best, degenerate=False)


def num_segments(img: ImageBuffer) -> int:
    """Count of 4-connected components over both classes of the Otsu-binarized
    grayscale image."""
    gray = to_grayscale(img)
    levels = np.clip(np.rint(gray.data * 255), 0, 255).astype(int)
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    level, degenerate = otsu_threshold(hist)
    if degenerate:
        return 1
    fg = levels > level
    _, n_fg = ndimage.label(fg, structure=_FOUR_CONNECTED)
    _, n_bg = ndimage.label(~fg, structure=_FOUR_CONNECTED)
    return int(n_fg + n_bg)
