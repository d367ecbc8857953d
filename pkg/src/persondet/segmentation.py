"""Graph-based image segmentation (greedy region merging on a pixel grid).

Pixels are nodes of a 4-connected grid graph; edge weights are Euclidean
RGB distances after Gaussian pre-smoothing. Edges are merged in weight
order when the weight is no larger than the internal difference of either
component plus a size-dependent slack k / |C|, then components smaller than
min_size are absorbed into their nearest neighbour. The result is a
partition of the image into connected regions.

Images are float RGB arrays of shape (H, W, 3) with values in [0, 1].
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError


@dataclass(frozen=True)
class SegmentationParams:
    k: float = 0.8  # merging slack scale; larger -> fewer, bigger regions
    min_size: int = 20
    gaussian_sigma: float = 0.8

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.min_size < 1:
            raise ValueError("min_size must be at least 1")
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be non-negative")


class _UnionFind:
    __slots__ = ("parent", "rank", "size", "count")

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.size = [1] * n
        self.count = n

    def find(self, x):
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        self.count -= 1
        return a


def _grid_edges(h, w):
    idx = np.arange(h * w).reshape(h, w)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([right, down], axis=0)


def segment(image, params=SegmentationParams()):
    """Partition an image into connected regions; returns an (H, W) label map.

    Labels are contiguous ints 0..n-1 in scanline-first-pixel order, so the
    result is deterministic for identical inputs.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise DataError(f"expected a non-empty (H, W, 3) image, got shape {image.shape}")
    h, w = image.shape[:2]

    if params.gaussian_sigma > 0:
        smooth = np.stack(
            [ndimage.gaussian_filter(image[:, :, c], params.gaussian_sigma)
             for c in range(3)], axis=2)
    else:
        smooth = image

    edges = _grid_edges(h, w)
    flat = smooth.reshape(-1, 3)
    weights = np.sqrt(((flat[edges[:, 0]] - flat[edges[:, 1]]) ** 2).sum(axis=1))
    order = np.argsort(weights, kind="stable")

    uf = _UnionFind(h * w)
    # internal difference (max MST edge so far) per component root
    threshold = [params.k] * (h * w)
    k = params.k
    ea = edges[:, 0].tolist()
    eb = edges[:, 1].tolist()
    wl = weights.tolist()
    for e in order.tolist():
        a = uf.find(ea[e])
        b = uf.find(eb[e])
        if a == b:
            continue
        wt = wl[e]
        if wt <= threshold[a] and wt <= threshold[b]:
            root = uf.union(a, b)
            threshold[root] = wt + k / uf.size[root]

    # absorb undersized components along the lightest edges first
    min_size = params.min_size
    for e in order.tolist():
        a = uf.find(ea[e])
        b = uf.find(eb[e])
        if a != b and (uf.size[a] < min_size or uf.size[b] < min_size):
            uf.union(a, b)

    roots = np.fromiter((uf.find(i) for i in range(h * w)), dtype=np.int64, count=h * w)
    _, labels = np.unique(roots, return_inverse=True)
    # renumber so labels appear in scanline order of first occurrence
    first = np.full(labels.max() + 1, h * w, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(h * w))
    rank = np.argsort(np.argsort(first))
    return rank[labels].reshape(h, w)


def region_boxes(labels):
    """Tight bounding box per label -> (n, 4) array of (x1, y1, x2, y2).

    Boxes use exclusive upper corners, so a single pixel at (r, c) yields
    (c, r, c+1, r+1).
    """
    n = labels.max() + 1
    slices = ndimage.find_objects(labels + 1)
    boxes = np.zeros((n, 4), dtype=np.float64)
    for i, sl in enumerate(slices):
        rs, cs = sl
        boxes[i] = (cs.start, rs.start, cs.stop, rs.stop)
    return boxes


def region_sizes(labels):
    return np.bincount(labels.ravel(), minlength=labels.max() + 1)
