"""Foreground/background separation and the three figure-ground features.

Segmentation follows the classic iterated graph-cut recipe: a 5% border frame
is pinned as background, each class is modeled by a 5-component RGB Gaussian
mixture, and labels are re-solved by max-flow/min-cut over a 4-neighbor grid
with a contrast-weighted Potts smoothness term (gamma = 50 on the [0,255]
scale).  If a class empties, segmentation falls back to thresholding the
saliency map at its Otsu level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .composition import saliency_map
from .core import ImageBuffer, canny_edges, to_grayscale

GMM_COMPONENTS = 5
GAMMA = 50.0
MAX_ITERATIONS = 5
LABEL_CHANGE_STOP = 0.001  # stop when < 0.1% of labels change
BORDER_FRACTION = 0.05
MIN_SIDE = 32

_CAP_SCALE = 1000.0  # float energies -> integer capacities for max-flow
_HARD_CAP = np.int64(1) << 40

TEXTURE_CANNY_LOW = 0.1
TEXTURE_CANNY_HIGH = 0.2


class GaussianMixture:
    """Fixed-count RGB mixture fit by hard-assignment EM. Deterministic."""

    def __init__(self, pixels: np.ndarray, n_components: int = GMM_COMPONENTS):
        pixels = np.asarray(pixels, dtype=np.float64)
        n = len(pixels)
        k = max(1, min(n_components, n))
        # luminance-quantile init keeps the fit deterministic
        lum = pixels @ np.array([0.299, 0.587, 0.114])
        order = np.argsort(lum, kind="stable")
        groups = np.array_split(order, k)
        assign = np.empty(n, dtype=np.int64)
        for ci, idx in enumerate(groups):
            assign[idx] = ci
        self.n_components = k
        self._fit(pixels, assign)
        for _ in range(2):
            assign = self._assign(pixels)
            self._fit(pixels, assign)

    def _fit(self, pixels: np.ndarray, assign: np.ndarray) -> None:
        k = self.n_components
        self.weights = np.zeros(k)
        self.means = np.zeros((k, 3))
        self.precisions = np.zeros((k, 3, 3))
        self.log_norms = np.zeros(k)
        n = len(pixels)
        for ci in range(k):
            sel = assign == ci
            count = int(sel.sum())
            if count == 0:
                self.weights[ci] = 0.0
                self.means[ci] = 0.0
                self.precisions[ci] = np.eye(3)
                self.log_norms[ci] = -np.inf
                continue
            self.weights[ci] = count / n
            pts = pixels[sel]
            self.means[ci] = pts.mean(axis=0)
            diff = pts - self.means[ci]
            cov = diff.T @ diff / count + 1e-3 * np.eye(3)
            self.precisions[ci] = np.linalg.inv(cov)
            sign, logdet = np.linalg.slogdet(cov)
            self.log_norms[ci] = -0.5 * (3 * math.log(2 * math.pi) + logdet)

    def component_log_likelihood(self, pixels: np.ndarray) -> np.ndarray:
        """(n, k) per-component log density."""
        pixels = np.asarray(pixels, dtype=np.float64)
        out = np.full((len(pixels), self.n_components), -np.inf)
        for ci in range(self.n_components):
            if self.weights[ci] <= 0:
                continue
            diff = pixels - self.means[ci]
            maha = np.einsum("ij,jk,ik->i", diff, self.precisions[ci], diff)
            out[:, ci] = self.log_norms[ci] - 0.5 * maha
        return out

    def _assign(self, pixels: np.ndarray) -> np.ndarray:
        ll = self.component_log_likelihood(pixels)
        with np.errstate(divide="ignore"):
            ll = ll + np.where(self.weights > 0, np.log(self.weights), -np.inf)
        return np.argmax(ll, axis=1)

    def neg_log_likelihood(self, pixels: np.ndarray) -> np.ndarray:
        """-log of the mixture density per pixel."""
        ll = self.component_log_likelihood(pixels)
        with np.errstate(divide="ignore"):
            logw = np.where(self.weights > 0, np.log(self.weights), -np.inf)
        m = ll + logw
        top = m.max(axis=1, keepdims=True)
        out = top[:, 0] + np.log(np.exp(m - top).sum(axis=1))
        return -out

    def mahalanobis_min(self, pixels: np.ndarray) -> np.ndarray:
        """Min over components of the Mahalanobis distance (posterior checks)."""
        pixels = np.asarray(pixels, dtype=np.float64)
        best = np.full(len(pixels), np.inf)
        for ci in range(self.n_components):
            if self.weights[ci] <= 0:
                continue
            diff = pixels - self.means[ci]
            maha = np.einsum("ij,jk,ik->i", diff, self.precisions[ci], diff)
            best = np.minimum(best, maha)
        return np.sqrt(best)


@dataclass
class FigureGroundMask:
    mask: np.ndarray  # bool, True = foreground
    converged: bool
    method: str  # "graphcut" | "saliency-fallback"
    fg_model: GaussianMixture | None = field(default=None, repr=False)
    bg_model: GaussianMixture | None = field(default=None, repr=False)


def _border_mask(h: int, w: int, fraction: float = BORDER_FRACTION) -> np.ndarray:
    my = max(1, round(fraction * h))
    mx = max(1, round(fraction * w))
    border = np.ones((h, w), dtype=bool)
    border[my : h - my, mx : w - mx] = False
    return border


def _pairwise_beta(rgb: np.ndarray) -> float:
    dx = np.sum((rgb[:, 1:] - rgb[:, :-1]) ** 2, axis=2)
    dy = np.sum((rgb[1:, :] - rgb[:-1, :]) ** 2, axis=2)
    mean_sq = (dx.sum() + dy.sum()) / (dx.size + dy.size)
    return 1.0 / (2.0 * mean_sq) if mean_sq > 0 else 0.0


def _min_cut_labels(
    d_fg: np.ndarray, d_bg: np.ndarray, hard_bg: np.ndarray, rgb: np.ndarray
) -> np.ndarray:
    """Solve the pixel labeling by max-flow/min-cut; returns a bool FG mask."""
    h, w = hard_bg.shape
    n = h * w
    source, sink = n, n + 1
    beta = _pairwise_beta(rgb)

    idx = np.arange(n).reshape(h, w)
    rows, cols, caps = [], [], []

    def add(u, v, c):
        rows.append(u)
        cols.append(v)
        caps.append(c)

    # t-links: cut pays (p -> sink) when p lands foreground, (source -> p)
    # when p lands background
    cap_to_sink = np.rint(d_fg * _CAP_SCALE).astype(np.int64).ravel()
    cap_from_src = np.rint(d_bg * _CAP_SCALE).astype(np.int64).ravel()
    flat_hard = hard_bg.ravel()
    cap_to_sink[flat_hard] = _HARD_CAP
    cap_from_src[flat_hard] = 0

    rows.extend(np.full(n, source))
    cols.extend(range(n))
    caps.extend(cap_from_src)
    rows.extend(range(n))
    cols.extend(np.full(n, sink))
    caps.extend(cap_to_sink)

    def n_link(pa, pb, za, zb):
        wgt = GAMMA * np.exp(-beta * np.sum((za - zb) ** 2, axis=-1))
        c = np.rint(wgt * _CAP_SCALE).astype(np.int64).ravel()
        rows.extend(pa.ravel())
        cols.extend(pb.ravel())
        caps.extend(c)
        rows.extend(pb.ravel())
        cols.extend(pa.ravel())
        caps.extend(c)

    n_link(idx[:, :-1], idx[:, 1:], rgb[:, :-1], rgb[:, 1:])
    n_link(idx[:-1, :], idx[1:, :], rgb[:-1, :], rgb[1:, :])

    graph = csr_matrix(
        (np.asarray(caps, dtype=np.int64), (rows, cols)), shape=(n + 2, n + 2)
    )
    result = maximum_flow(graph, source, sink)
    residual = graph - result.flow
    residual.data = np.maximum(residual.data, 0)
    residual.eliminate_zeros()
    reachable = breadth_first_order(
        residual, source, directed=True, return_predecessors=False
    )
    fg = np.zeros(n + 2, dtype=bool)
    fg[reachable] = True
    return fg[:n].reshape(h, w)


def _saliency_fallback(img: ImageBuffer) -> FigureGroundMask | None:
    sal = saliency_map(img)
    if sal.degenerate:
        return None
    mask = sal.salient_mask()
    if not mask.any() or mask.all():
        return None
    return FigureGroundMask(mask=mask, converged=True, method="saliency-fallback")


def segment_figure_ground(img: ImageBuffer) -> FigureGroundMask:
    """Iterated GMM + graph-cut segmentation with a saliency fallback.

    Returns a degenerate mask (converged=False) for images below 32x32 or
    when both strategies collapse to a single class.
    """
    h, w = img.height, img.width
    if h < MIN_SIDE or w < MIN_SIDE:
        return FigureGroundMask(
            mask=np.zeros((h, w), dtype=bool), converged=False, method="graphcut"
        )
    rgb = img.data.astype(np.float64).reshape(h, w, -1)
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    flat = rgb.reshape(-1, 3)

    hard_bg = _border_mask(h, w)
    fg = ~hard_bg  # interior rectangle starts as foreground candidate
    fg_model = bg_model = None
    for _ in range(MAX_ITERATIONS):
        if not fg.any() or fg.all():
            break
        fg_model = GaussianMixture(flat[fg.ravel()])
        bg_model = GaussianMixture(flat[~fg.ravel()])
        d_fg = fg_model.neg_log_likelihood(flat).reshape(h, w)
        d_bg = bg_model.neg_log_likelihood(flat).reshape(h, w)
        new_fg = _min_cut_labels(d_fg, d_bg, hard_bg, rgb)
        changed = np.count_nonzero(new_fg ^ fg)
        fg = new_fg
        if changed < LABEL_CHANGE_STOP * fg.size:
            break

    if fg.any() and not fg.all():
        return FigureGroundMask(
            mask=fg, converged=True, method="graphcut",
            fg_model=fg_model, bg_model=bg_model,
        )
    fallback = _saliency_fallback(img)
    if fallback is not None:
        return fallback
    return FigureGroundMask(
        mask=np.zeros((h, w), dtype=bool), converged=False, method="graphcut"
    )


def size_difference(mask: FigureGroundMask) -> float | None:
    """(|FG| - |BG|) / (|FG| + |BG|), signed."""
    if not mask.converged:
        return None
    n_fg = int(mask.mask.sum())
    n_bg = mask.mask.size - n_fg
    return (n_fg - n_bg) / (n_fg + n_bg)


def color_difference(img: ImageBuffer, mask: FigureGroundMask) -> float | None:
    """Euclidean distance between mean FG and BG colors, normalized to [0,1]."""
    if not mask.converged:
        return None
    rgb = img.data.astype(np.float64).reshape(img.height, img.width, -1)
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    fg_mean = rgb[mask.mask].mean(axis=0)
    bg_mean = rgb[~mask.mask].mean(axis=0)
    return float(np.linalg.norm(fg_mean - bg_mean) / (255.0 * math.sqrt(3.0)))


def texture_difference(img: ImageBuffer, mask: FigureGroundMask) -> float | None:
    """|edge density(FG) - edge density(BG)| under Canny(0.1, 0.2)."""
    if not mask.converged:
        return None
    edges = canny_edges(to_grayscale(img), TEXTURE_CANNY_LOW, TEXTURE_CANNY_HIGH)
    fg_density = edges[mask.mask].mean() if mask.mask.any() else 0.0
    bg_density = edges[~mask.mask].mean() if (~mask.mask).any() else 0.0
    return float(abs(fg_density - bg_density))


def swap_classes(mask: FigureGroundMask) -> FigureGroundMask:
    return FigureGroundMask(
        mask=~mask.mask, converged=mask.converged, method=mask.method,
        fg_model=mask.bg_model, bg_model=mask.fg_model,
    )
