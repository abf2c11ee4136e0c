"""Felzenszwalb-Huttenlocher graph segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import _kernels, io
from .config import FhParams


@dataclass(frozen=True, eq=False)
class SegmentMap:
    segment_id: np.ndarray  # (H, W) int64, contiguous ids in scan order
    n_segments: int

    @property
    def shape(self):
        return self.segment_id.shape

    def sizes(self):
        return np.bincount(self.segment_id.ravel(), minlength=self.n_segments)

    def save_pgm(self, path):
        io.write_pgm(path, self.segment_id, scaled=False)


def grid_edges(height, width):
    """Undirected 8-neighborhood edges with ``src < dst`` (flat row-major ids)."""
    idx = np.arange(height * width).reshape(height, width)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),  # right
        (idx[:-1, :], idx[1:, :]),  # down
        (idx[:-1, :-1], idx[1:, 1:]),  # down-right
        (idx[1:, :-1], idx[:-1, 1:]),  # up-right
    ]
    a = np.concatenate([p[0].ravel() for p in pairs])
    b = np.concatenate([p[1].ravel() for p in pairs])
    return np.minimum(a, b), np.maximum(a, b)


def sorted_edges(image, sigma):
    """Edges ordered by (weight, source, target); weights are RGB distances on 0..255."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = img[..., None]
    img = img * 255.0
    if sigma > 0:
        img = gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest", truncate=4.0)
    h, w = img.shape[:2]
    src, dst = grid_edges(h, w)
    flat = img.reshape(h * w, -1)
    wts = np.sqrt(np.sum((flat[src] - flat[dst]) ** 2, axis=1))
    order = np.lexsort((dst, src, wts))
    return src[order], dst[order], wts[order]


def segment(image, params: FhParams | None = None) -> SegmentMap:
    params = params or FhParams()
    img = np.asarray(image, dtype=float)
    h, w = img.shape[:2]
    src, dst, wts = sorted_edges(img, params.smoothing_sigma)
    roots = _kernels.fh_merge(h * w, src, dst, wts, params.k, params.min_size)
    ids = _kernels.relabel(roots)
    return SegmentMap(ids.reshape(h, w), int(ids.max()) + 1)
