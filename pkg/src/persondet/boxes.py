"""Axis-aligned box geometry: IoU, regression deltas, clipping.

Boxes are (x1, y1, x2, y2) arrays in pixel coordinates with x2 > x1 and
y2 > y1; area is (x2 - x1) * (y2 - y1). Functions accept single boxes of
shape (4,) or stacks of shape (N, 4).
"""

import numpy as np


def as_boxes(boxes):
    """Coerce to a float64 (N, 4) array without validating."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (N, 4), got {arr.shape}")
    return arr


def validate_box(box, name="box"):
    """Raise ValueError unless the box has positive size and finite coords."""
    x1, y1, x2, y2 = (float(v) for v in box)
    if not all(np.isfinite(v) for v in (x1, y1, x2, y2)):
        raise ValueError(f"{name} has non-finite coordinates: {box}")
    if x2 <= x1 or y2 <= y1:
        raise ValueError(f"{name} has non-positive size: {box}")


def box_area(boxes):
    b = as_boxes(boxes)
    return (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])


def iou(a, b):
    """Intersection-over-union of two boxes, in [0, 1]."""
    ax1, ay1, ax2, ay2 = (float(v) for v in a)
    bx1, by1, bx2, by2 = (float(v) for v in b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def iou_matrix(a, b):
    """Pairwise IoU between box stacks a (N, 4) and b (M, 4) -> (N, M)."""
    a = as_boxes(a)
    b = as_boxes(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = box_area(a)[:, None]
    area_b = box_area(b)[None, :]
    return inter / (area_a + area_b - inter)


def encode_bbox(proposal, gt):
    """Regression target (tx, ty, tw, th) mapping the proposal onto the gt box.

    tx, ty are the center shift normalized by proposal size; tw, th are log
    size ratios. encode/decode are exact inverses.
    """
    p = as_boxes(proposal)
    g = as_boxes(gt)
    pw = p[:, 2] - p[:, 0]
    ph = p[:, 3] - p[:, 1]
    pcx = p[:, 0] + 0.5 * pw
    pcy = p[:, 1] + 0.5 * ph
    gw = g[:, 2] - g[:, 0]
    gh = g[:, 3] - g[:, 1]
    gcx = g[:, 0] + 0.5 * gw
    gcy = g[:, 1] + 0.5 * gh
    deltas = np.stack(
        [(gcx - pcx) / pw, (gcy - pcy) / ph, np.log(gw / pw), np.log(gh / ph)], axis=1
    )
    return deltas[0] if np.asarray(proposal).ndim == 1 else deltas


def decode_bbox(proposal, delta):
    """Apply (tx, ty, tw, th) deltas to proposals; inverse of encode_bbox."""
    p = as_boxes(proposal)
    d = np.asarray(delta, dtype=np.float64)
    if d.ndim == 1:
        d = d.reshape(1, 4)
    pw = p[:, 2] - p[:, 0]
    ph = p[:, 3] - p[:, 1]
    pcx = p[:, 0] + 0.5 * pw
    pcy = p[:, 1] + 0.5 * ph
    gcx = pcx + d[:, 0] * pw
    gcy = pcy + d[:, 1] * ph
    gw = pw * np.exp(d[:, 2])
    gh = ph * np.exp(d[:, 3])
    boxes = np.stack(
        [gcx - 0.5 * gw, gcy - 0.5 * gh, gcx + 0.5 * gw, gcy + 0.5 * gh], axis=1
    )
    return boxes[0] if np.asarray(proposal).ndim == 1 else boxes


def clip_boxes(boxes, width, height):
    """Clip boxes to the image rectangle [0, width] x [0, height]."""
    b = as_boxes(boxes).copy()
    b[:, 0::2] = np.clip(b[:, 0::2], 0, width)
    b[:, 1::2] = np.clip(b[:, 1::2], 0, height)
    return b
