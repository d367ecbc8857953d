"""Detection head loss: two-class log loss plus smooth-L1 box regression.

Labels are 1 for person ROIs and 0 for background ROIs. The box term only
applies to person ROIs and is averaged over their 4 * n_pos coordinates;
``bbox_weight`` (lambda, default 1.0) trades it off against the log loss.
"""

import numpy as np

from .errors import ConfigError


def smooth_l1(x):
    """Elementwise smooth L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_forward(score_logits, bbox_pred, roi_labels, bbox_targets, bbox_weight=1.0):
    """Loss and gradients for one minibatch of ROIs.

    score_logits: (N, 2) with column 0 = background, column 1 = person.
    bbox_pred:    (N, 4) regression deltas; only person rows contribute.
    roi_labels:   (N,) ints in {0, 1}.
    bbox_targets: (N, 4) encoded deltas, ignored on background rows.

    Returns (loss, parts, dlogits, dbbox) where parts breaks the loss into
    its classification and box components.
    """
    logits = np.asarray(score_logits)
    bbox_pred = np.asarray(bbox_pred)
    labels = np.asarray(roi_labels)
    n = logits.shape[0]
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ConfigError(f"expected (N, 2) score logits, got {logits.shape}")
    if bbox_pred.shape != (n, 4):
        raise ConfigError(f"expected ({n}, 4) bbox predictions, got {bbox_pred.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise ConfigError(f"roi labels must be 0 or 1, got {sorted(set(labels.tolist()))}")

    probs = softmax(logits.astype(np.float64))
    eps = np.finfo(np.float64).tiny
    cls_loss = -np.mean(np.log(probs[np.arange(n), labels] + eps))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    dlogits = (probs - onehot) / n

    pos = labels == 1
    n_pos = int(pos.sum())
    dbbox = np.zeros_like(bbox_pred, dtype=np.float64)
    if n_pos:
        resid = bbox_pred[pos].astype(np.float64) - np.asarray(bbox_targets)[pos]
        box_loss = float(np.mean(smooth_l1(resid)))
        dbbox[pos] = bbox_weight * smooth_l1_grad(resid) / (4.0 * n_pos)
    else:
        box_loss = 0.0

    loss = float(cls_loss + bbox_weight * box_loss)
    parts = {"cls": float(cls_loss), "bbox": box_loss}
    return loss, parts, dlogits.astype(score_logits.dtype), dbbox.astype(bbox_pred.dtype)
