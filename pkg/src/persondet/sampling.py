"""Training-ROI selection: overlap intervals and minibatch composition.

A sampling config splits region proposals into positives, negatives and
discards by their maximum IoU with the ground truth. The four named presets
differ in the negative interval and the positive threshold:

    default:     negative [0.1, 0.5), positive >= 0.5
    gap:         negative [0.1, 0.4), positive >= 0.6
    all-neg:     negative [0.0, 0.5), positive >= 0.5
    gap+all-neg: negative [0.0, 0.4), positive >= 0.6

Intervals are half-open and the positive threshold is inclusive. These
criteria affect training only; evaluation always matches at IoU >= 0.5.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .boxes import iou_matrix

log = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
DISCARD = "discard"


@dataclass(frozen=True)
class ROISamplingConfig:
    """Overlap intervals assigning training ROIs to positive/negative/discard."""

    neg_lo: float
    neg_hi: float
    pos_lo: float
    name: str = "custom"

    def __post_init__(self):
        if not (0.0 <= self.neg_lo <= self.neg_hi <= self.pos_lo <= 1.0):
            raise ValueError(
                f"require 0 <= neg_lo <= neg_hi <= pos_lo <= 1, got "
                f"({self.neg_lo}, {self.neg_hi}, {self.pos_lo})"
            )

    def classify(self, overlap):
        """Label a max-IoU value: positive, negative or discard."""
        if overlap >= self.pos_lo:
            return POSITIVE
        if self.neg_lo <= overlap < self.neg_hi:
            return NEGATIVE
        return DISCARD


SAMPLING_PRESETS = {
    "default": ROISamplingConfig(0.1, 0.5, 0.5, name="default"),
    "gap": ROISamplingConfig(0.1, 0.4, 0.6, name="gap"),
    "all-neg": ROISamplingConfig(0.0, 0.5, 0.5, name="all-neg"),
    "gap+all-neg": ROISamplingConfig(0.0, 0.4, 0.6, name="gap+all-neg"),
}


def sampling_preset(name):
    try:
        return SAMPLING_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown sampling preset {name!r}; choose from {sorted(SAMPLING_PRESETS)}"
        ) from None


def classify_roi(roi, gts, cfg):
    """Classify one ROI against a list of annotations.

    Returns (label, gt_index) where gt_index is the argmax-IoU ground truth
    for positives and None otherwise. Difficult annotations are ignored
    entirely; with no eligible ground truth the max overlap is 0.
    """
    eligible = [g for g in gts if not g.difficult]
    if not eligible:
        return cfg.classify(0.0), None
    ious = iou_matrix(np.asarray(roi, dtype=np.float64), np.stack([g.box for g in eligible]))[0]
    best = int(np.argmax(ious))
    label = cfg.classify(float(ious[best]))
    if label != POSITIVE:
        return label, None
    # map back to the index within the full annotation list
    full_index = [i for i, g in enumerate(gts) if not g.difficult][best]
    return POSITIVE, full_index


def label_rois(rois, gts, cfg):
    """Vectorized classify_roi over a (N, 4) ROI stack.

    Returns (labels, gt_indices, max_ious); gt_indices is -1 except for
    positives, where it indexes into the full gts list.
    """
    rois = np.asarray(rois, dtype=np.float64).reshape(-1, 4)
    n = rois.shape[0]
    eligible_idx = [i for i, g in enumerate(gts) if not g.difficult]
    if not eligible_idx or n == 0:
        max_ious = np.zeros(n)
        argmax = np.full(n, -1, dtype=int)
    else:
        ious = iou_matrix(rois, np.stack([gts[i].box for i in eligible_idx]))
        max_ious = ious.max(axis=1)
        argmax = np.array([eligible_idx[j] for j in ious.argmax(axis=1)], dtype=int)
    labels = np.array([cfg.classify(float(m)) for m in max_ious], dtype=object)
    gt_indices = np.where(labels == POSITIVE, argmax, -1)
    return labels, gt_indices, max_ious


def sample_minibatch(proposals, gts, cfg, count=64, pos_fraction=0.25, rng=None):
    """Draw a labelled training minibatch of up to ``count`` ROIs.

    Positives are capped at round(pos_fraction * count); the remainder is
    filled with negatives. Discarded ROIs never appear. Deterministic for a
    fixed rng. Returns a list of (roi, label, gt_index) tuples; empty (with
    a warning) when no proposal is eligible.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if rng is None:
        rng = np.random.default_rng()
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 4)
    labels, gt_indices, _ = label_rois(proposals, gts, cfg)
    pos_idx = np.flatnonzero(labels == POSITIVE)
    neg_idx = np.flatnonzero(labels == NEGATIVE)
    if len(pos_idx) == 0 and len(neg_idx) == 0:
        warnings.warn("no eligible ROIs for minibatch (all proposals discarded)")
        return []
    pos_cap = int(round(pos_fraction * count))
    n_pos = min(len(pos_idx), pos_cap)
    n_neg = min(len(neg_idx), count - n_pos)
    chosen_pos = rng.choice(pos_idx, size=n_pos, replace=False) if n_pos else np.array([], int)
    chosen_neg = rng.choice(neg_idx, size=n_neg, replace=False) if n_neg else np.array([], int)
    batch = [(proposals[i], POSITIVE, int(gt_indices[i])) for i in chosen_pos]
    batch += [(proposals[i], NEGATIVE, -1) for i in chosen_neg]
    return batch
