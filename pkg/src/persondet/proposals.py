"""Class-agnostic region proposals by hierarchical grouping of segments.

Starting from a graph-based over-segmentation, adjacent region pairs are
greedily merged in order of similarity

    s = s_color + s_texture + s_size + s_fill

where s_color and s_texture are histogram intersections, s_size favours
merging small regions early and s_fill favours pairs that tile their joint
bounding box. The bounding box of every initial and merged region becomes a
proposal, so n initial regions yield exactly 2n - 1 boxes before
deduplication. The whole procedure is deterministic: similarity ties break
on the lowest region-id pair.

An optional diversification mode reruns the grouping over HSV and Lab
colour spaces and several segmentation scales and pools the results.
"""

import csv
import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .boxes import iou_matrix
from .segmentation import SegmentationParams, region_boxes, region_sizes, segment

COLOR_BINS = 25
TEXTURE_ORIENTATIONS = 8
TEXTURE_BINS = 10


@dataclass
class ProposalSet:
    image_id: str
    boxes: np.ndarray  # (n, 4) float
    priorities: np.ndarray  # (n,) int, 1 = coarsest region

    def __len__(self):
        return len(self.boxes)


def color_histograms(image, labels, n_regions):
    """Per-region colour histogram, 25 bins x 3 channels, L1-normalized."""
    bins = np.clip((image * COLOR_BINS).astype(np.int64), 0, COLOR_BINS - 1)
    lab = labels.ravel()
    hist = np.zeros((n_regions, 3 * COLOR_BINS))
    for c in range(3):
        idx = lab * COLOR_BINS + bins[:, :, c].ravel()
        counts = np.bincount(idx, minlength=n_regions * COLOR_BINS)
        hist[:, c * COLOR_BINS:(c + 1) * COLOR_BINS] = counts.reshape(n_regions, COLOR_BINS)
    sums = hist.sum(axis=1, keepdims=True)
    return hist / np.where(sums > 0, sums, 1)


def texture_histograms(image, labels, n_regions):
    """Gradient-orientation texture histogram, 8 orientations x 10 magnitude
    bins x 3 channels, L1-normalized per region."""
    lab = labels.ravel()
    per_channel = TEXTURE_ORIENTATIONS * TEXTURE_BINS
    hist = np.zeros((n_regions, 3 * per_channel))
    for c in range(3):
        gy = ndimage.gaussian_filter(image[:, :, c], 1.0, order=(1, 0))
        gx = ndimage.gaussian_filter(image[:, :, c], 1.0, order=(0, 1))
        theta = np.arctan2(gy, gx)  # [-pi, pi]
        obin = np.clip(((theta + np.pi) / (2 * np.pi) * TEXTURE_ORIENTATIONS).astype(np.int64),
                       0, TEXTURE_ORIENTATIONS - 1)
        mag = np.hypot(gx, gy)
        peak = mag.max()
        mbin = np.clip((mag / (peak if peak > 0 else 1.0) * TEXTURE_BINS).astype(np.int64),
                       0, TEXTURE_BINS - 1)
        idx = lab * per_channel + (obin * TEXTURE_BINS + mbin).ravel()
        counts = np.bincount(idx, minlength=n_regions * per_channel)
        hist[:, c * per_channel:(c + 1) * per_channel] = counts.reshape(n_regions, per_channel)
    sums = hist.sum(axis=1, keepdims=True)
    return hist / np.where(sums > 0, sums, 1)


def adjacency_pairs(labels):
    """Set of (i, j) label pairs (i < j) sharing a 4-connected boundary."""
    pairs = set()
    a, b = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    diff = a != b
    pairs.update(zip(np.minimum(a[diff], b[diff]).tolist(),
                     np.maximum(a[diff], b[diff]).tolist()))
    a, b = labels[:-1, :].ravel(), labels[1:, :].ravel()
    diff = a != b
    pairs.update(zip(np.minimum(a[diff], b[diff]).tolist(),
                     np.maximum(a[diff], b[diff]).tolist()))
    return pairs


class _RegionPool:
    """Mutable region state for the grouping loop."""

    def __init__(self, image, labels):
        n = int(labels.max()) + 1
        self.n_initial = n
        self.image_size = float(labels.size)
        self.sizes = region_sizes(labels).astype(np.float64).tolist()
        self.bboxes = region_boxes(labels).tolist()
        self.color = color_histograms(image, labels, n)
        self.texture = texture_histograms(image, labels, n)
        self.neighbors = {i: set() for i in range(n)}
        for i, j in adjacency_pairs(labels):
            self.neighbors[i].add(j)
            self.neighbors[j].add(i)
        self.alive = set(range(n))

    def similarity(self, i, j):
        s_color = np.minimum(self.color[i], self.color[j]).sum()
        s_texture = np.minimum(self.texture[i], self.texture[j]).sum()
        s_size = 1.0 - (self.sizes[i] + self.sizes[j]) / self.image_size
        bi, bj = self.bboxes[i], self.bboxes[j]
        bb_w = max(bi[2], bj[2]) - min(bi[0], bj[0])
        bb_h = max(bi[3], bj[3]) - min(bi[1], bj[1])
        s_fill = 1.0 - (bb_w * bb_h - self.sizes[i] - self.sizes[j]) / self.image_size
        return s_color + s_texture + s_size + s_fill

    def merge(self, i, j):
        """Merge regions i and j into a new region; returns its id."""
        t = len(self.sizes)
        si, sj = self.sizes[i], self.sizes[j]
        self.sizes.append(si + sj)
        bi, bj = self.bboxes[i], self.bboxes[j]
        self.bboxes.append([min(bi[0], bj[0]), min(bi[1], bj[1]),
                            max(bi[2], bj[2]), max(bi[3], bj[3])])
        w = np.array([[si], [sj]]) / (si + sj)
        self.color = np.vstack([self.color, w[0] * self.color[i] + w[1] * self.color[j]])
        self.texture = np.vstack([self.texture, w[0] * self.texture[i] + w[1] * self.texture[j]])
        merged_neighbors = (self.neighbors[i] | self.neighbors[j]) - {i, j}
        self.neighbors[t] = merged_neighbors
        for nb in merged_neighbors:
            self.neighbors[nb].discard(i)
            self.neighbors[nb].discard(j)
            self.neighbors[nb].add(t)
        del self.neighbors[i], self.neighbors[j]
        self.alive.discard(i)
        self.alive.discard(j)
        self.alive.add(t)
        return t


def _group_regions(image, labels):
    """Hierarchical grouping; returns bboxes of all 2n-1 regions in creation
    order (initial regions first, merges appended as they happen)."""
    pool = _RegionPool(image, labels)
    heap = []
    for i in range(pool.n_initial):
        for j in pool.neighbors[i]:
            if i < j:
                heapq.heappush(heap, (-pool.similarity(i, j), i, j))
    while len(pool.alive) > 1:
        while True:
            neg_s, i, j = heapq.heappop(heap)
            if i in pool.alive and j in pool.alive and j in pool.neighbors[i]:
                break
        t = pool.merge(i, j)
        for nb in sorted(pool.neighbors[t]):
            heapq.heappush(heap, (-pool.similarity(t, nb), nb, t))
    return np.asarray(pool.bboxes), pool.n_initial


def _dedup_keep_order(boxes):
    seen = set()
    keep = []
    for idx, b in enumerate(boxes):
        key = tuple(b)
        if key not in seen:
            seen.add(key)
            keep.append(idx)
    return keep


def selective_search(image, params=SegmentationParams(), image_id="",
                     min_box_size=20, max_proposals=2000, diversify=False):
    """Region proposals for one image, coarsest first.

    min_box_size drops boxes narrower or shorter than the given pixel count;
    max_proposals truncates the (deduplicated) list. With diversify=True the
    grouping also runs in HSV and Lab colour spaces over several
    segmentation scales and the proposals are pooled, coarsest first per
    strategy, before deduplication.
    """
    image = np.asarray(image, dtype=np.float64)
    variants = [(image, params)]
    if diversify:
        variants = []
        for space in (_rgb_to_hsv(image), _rgb_to_lab(image)):
            for k in (params.k * 0.5, params.k, params.k * 1.5, params.k * 3.0):
                variants.append((space, SegmentationParams(
                    k=k, min_size=params.min_size,
                    gaussian_sigma=params.gaussian_sigma)))

    collected = []
    for img, p in variants:
        labels = segment(img, p)
        all_boxes, n_initial = _group_regions(img, labels)
        collected.append(all_boxes[::-1])  # creation order reversed: coarsest first

    stacked = np.vstack(collected)
    keep = _dedup_keep_order(stacked.tolist())
    boxes = stacked[keep]
    wide = (boxes[:, 2] - boxes[:, 0]) >= min_box_size
    tall = (boxes[:, 3] - boxes[:, 1]) >= min_box_size
    boxes = boxes[wide & tall][:max_proposals]
    return ProposalSet(image_id=image_id, boxes=boxes,
                       priorities=np.arange(1, len(boxes) + 1))


def proposal_recall(proposal_boxes, gts, iou_thresh=0.5):
    """Fraction of non-difficult ground truths covered at the IoU threshold.

    Defined as 1.0 when there are no eligible ground truths.
    """
    if not (0.0 < iou_thresh <= 1.0):
        raise ValueError("iou_thresh must lie in (0, 1]")
    eligible = [g for g in gts if not g.difficult]
    if not eligible:
        return 1.0
    boxes = np.asarray(proposal_boxes, dtype=np.float64).reshape(-1, 4)
    if len(boxes) == 0:
        return 0.0
    ious = iou_matrix(np.stack([g.box for g in eligible]), boxes)
    return float((ious.max(axis=1) >= iou_thresh).mean())


def save_proposals_csv(pset, path):
    """One proposal per row: x1, y1, x2, y2, priority."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for box, pri in zip(pset.boxes, pset.priorities):
            writer.writerow([f"{v:.2f}" for v in box] + [int(pri)])


def load_proposals_csv(path, image_id=""):
    boxes = []
    priorities = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row:
                continue
            boxes.append([float(v) for v in row[:4]])
            priorities.append(int(row[4]) if len(row) > 4 else len(priorities) + 1)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return ProposalSet(image_id=image_id, boxes=boxes,
                       priorities=np.asarray(priorities, dtype=int))


def _rgb_to_hsv(image):
    r, g, b = image[:, :, 0], image[:, :, 1], image[:, :, 2]
    maxc = image.max(axis=2)
    minc = image.min(axis=2)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        dd = np.where(delta > 0, delta, 1.0)
        h = np.select(
            [maxc == r, maxc == g],
            [((g - b) / dd) % 6.0, (b - r) / dd + 2.0],
            default=(r - g) / dd + 4.0,
        ) / 6.0
    h = np.where(delta > 0, h, 0.0)
    return np.stack([h, s, v], axis=2)


def _rgb_to_lab(image):
    # D65 sRGB -> CIELAB, rescaled to [0, 1] per channel
    thresh = 0.04045
    lin = np.where(image > thresh, ((image + 0.055) / 1.055) ** 2.4, image / 12.92)
    m = np.array([[0.412453, 0.357580, 0.180423],
                  [0.212671, 0.715160, 0.072169],
                  [0.019334, 0.119193, 0.950227]])
    xyz = lin @ m.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    cut = 0.008856
    f = np.where(xyz > cut, np.cbrt(xyz), 7.787 * xyz + 4.0 / 29.0)
    lab = np.stack([116.0 * f[:, :, 1] - 16.0,
                    500.0 * (f[:, :, 0] - f[:, :, 1]),
                    200.0 * (f[:, :, 1] - f[:, :, 2])], axis=2)
    lab[:, :, 0] /= 100.0
    lab[:, :, 1] = lab[:, :, 1] / 254.0 + 0.5
    lab[:, :, 2] = lab[:, :, 2] / 254.0 + 0.5
    return np.clip(lab, 0.0, 1.0)
