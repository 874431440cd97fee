"""Depth/confidence extraction from a fused grid and semi-dense post-processing.

The pipeline order is fixed: argmax extraction, robust-max normalization,
adaptive Gaussian thresholding, masked median filtering, optional morphological
fill. Every step is deterministic.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dsi import DsiGrid
from .errors import ConfigurationError
from .geometry import ReferenceView


@dataclass
class DepthResult:
    """Per-pixel depth, confidence, and keep-mask at the reference view.

    depth is NaN wherever mask is false; confidence is the per-pixel maximum of
    the fused grid along the depth axis wherever it was computed.
    """

    depth: np.ndarray
    confidence: np.ndarray
    mask: np.ndarray
    z_range: tuple[float, float]

    def masked_depth(self) -> np.ndarray:
        out = np.where(self.mask, self.depth, np.nan)
        return out

    def point_count(self) -> int:
        return int(self.mask.sum())

    def copy(self) -> "DepthResult":
        return DepthResult(self.depth.copy(), self.confidence.copy(), self.mask.copy(), self.z_range)


def extract_depth_confidence(grid: DsiGrid, subvoxel: bool = False) -> DepthResult:
    """Argmax along the depth axis: depth of the strongest plane plus its value.

    Plane 0 is nearest, so argmax ties resolve toward nearer depth. Pixels
    whose whole column is zero get confidence 0 and are unmasked. With
    `subvoxel`, a parabola through the argmax plane and its neighbors (in
    inverse depth) refines the peak location.
    """
    vals = grid.values
    k = vals.argmax(axis=0)
    conf = np.take_along_axis(vals, k[None], axis=0)[0].astype(np.float64)
    depth = grid.plane_depths[k]
    if subvoxel:
        inv = 1.0 / grid.plane_depths
        km = np.clip(k - 1, 0, grid.n_z - 1)
        kp = np.clip(k + 1, 0, grid.n_z - 1)
        ym = np.take_along_axis(vals, km[None], axis=0)[0].astype(np.float64)
        yp = np.take_along_axis(vals, kp[None], axis=0)[0].astype(np.float64)
        denom = ym - 2.0 * conf + yp
        interior = (k > 0) & (k < grid.n_z - 1) & (denom < 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = 0.5 * (ym - yp) / denom
        delta = np.where(interior, np.clip(delta, -0.5, 0.5), 0.0)
        step = (inv[-1] - inv[0]) / (grid.n_z - 1)
        inv_refined = inv[k] + delta * step
        depth = 1.0 / inv_refined
    mask = conf > 0
    depth = np.where(mask, depth, np.nan)
    return DepthResult(depth, conf, mask, (grid.z_min, grid.z_max))


class RobustMaxAccumulator:
    """Collects per-packet confidence maxima; the robust max is a percentile of them.

    One sequence-level accumulator feeds normalization for every packet, so a
    handful of abnormally dense packets cannot rescale the rest.
    """

    def __init__(self, percentile: float = 98.0):
        if not 0 < percentile <= 100:
            raise ConfigurationError(f"percentile must be in (0, 100], got {percentile}")
        self.percentile = percentile
        self.maxima: list[float] = []

    def add(self, confidence: np.ndarray) -> None:
        self.maxima.append(float(np.max(confidence)) if confidence.size else 0.0)

    def value(self) -> float:
        if not self.maxima:
            return 0.0
        return float(np.percentile(np.asarray(self.maxima), self.percentile))


def normalize_confidence(confidence: np.ndarray, robust_max: float) -> np.ndarray:
    """Scale to [0, 255] against the sequence's robust maximum; clamps above it.

    A robust_max of 0 (no events anywhere) degenerates to an all-zero map.
    """
    if robust_max <= 0:
        return np.zeros_like(confidence, dtype=np.float64)
    return np.clip(confidence * (255.0 / robust_max), 0.0, 255.0)


def gaussian_kernel_2d(ksize: int, sigma: float | None = None) -> np.ndarray:
    """Separable Gaussian kernel, normalized to sum 1.

    sigma defaults to the conventional kernel-size rule
    0.3*((ksize-1)*0.5 - 1) + 0.8 (1.1 for a 5x5 kernel).
    """
    if ksize < 1 or ksize % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd and positive, got {ksize}")
    if sigma is None:
        sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8
    r = np.arange(ksize) - (ksize - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def agt_mask(
    c_norm: np.ndarray, ksize: int = 5, offset: float = -10.0, sigma: float | None = None
) -> np.ndarray:
    """Adaptive Gaussian thresholding of the normalized confidence map.

    A pixel is kept iff its value exceeds the Gaussian-weighted local mean over
    a ksize x ksize window plus `offset` (default -10 on the 0..255 scale, i.e.
    the local mean minus 10). Borders use reflected padding.
    """
    local_mean = ndimage.correlate(
        c_norm.astype(np.float64), gaussian_kernel_2d(ksize, sigma), mode="reflect"
    )
    return c_norm > local_mean + offset


def apply_mask(result: DepthResult, mask: np.ndarray) -> DepthResult:
    """Restrict a result to mask & current mask; depth outside becomes NaN."""
    m = result.mask & mask
    return DepthResult(np.where(m, result.depth, np.nan), result.confidence, m, result.z_range)


def median_filter(result: DepthResult, ksize: int = 5, min_neighbors: int = 3) -> DepthResult:
    """Masked median: replace each kept depth by the median of kept depths in its window.

    Pixels whose ksize x ksize window (self included) holds fewer than
    `min_neighbors` kept pixels are dropped; this removes isolated points.
    """
    if ksize % 2 == 0 or ksize < 1:
        raise ConfigurationError(f"kernel size must be odd and positive, got {ksize}")
    pad = ksize // 2
    depth = np.where(result.mask, result.depth, np.nan)
    padded = np.pad(depth, pad, mode="constant", constant_values=np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (ksize, ksize))
    flat = windows.reshape(*depth.shape, ksize * ksize)
    counts = np.count_nonzero(~np.isnan(flat), axis=-1)
    keep = result.mask & (counts >= min_neighbors)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(flat, axis=-1)
    new_depth = np.where(keep, med, np.nan)
    return DepthResult(new_depth, result.confidence, keep, result.z_range)


def morph_fill(result: DepthResult) -> DepthResult:
    """4-neighbor dilation of the mask; filled pixels take the proposing center's depth.

    Previously kept pixels are untouched. Where several kept neighbors propose
    a depth for the same new pixel, the nearest (smallest) depth wins.
    """
    depth = np.where(result.mask, result.depth, np.nan)
    candidates = np.full((4,) + depth.shape, np.nan)
    candidates[0, 1:, :] = depth[:-1, :]
    candidates[1, :-1, :] = depth[1:, :]
    candidates[2, :, 1:] = depth[:, :-1]
    candidates[3, :, :-1] = depth[:, 1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        proposal = np.nanmin(candidates, axis=0)
    fill = ~result.mask & ~np.isnan(proposal)
    new_depth = np.where(fill, proposal, depth)
    new_mask = result.mask | fill
    return DepthResult(new_depth, result.confidence, new_mask, result.z_range)


def to_point_cloud(result: DepthResult, ref: ReferenceView) -> np.ndarray:
    """Back-project kept pixels through the reference view into world coordinates.

    Returns an (n, 3) array; n equals the mask cardinality.
    """
    ys, xs = np.nonzero(result.mask)
    if len(xs) == 0:
        return np.zeros((0, 3))
    z = result.depth[ys, xs]
    cam = ref.camera
    xn = (xs - cam.cx) / cam.fx
    yn = (ys - cam.cy) / cam.fy
    pts_cam = np.stack([xn * z, yn * z, z], axis=1)
    return ref.pose.apply(pts_cam)
