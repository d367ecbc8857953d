"""Region-of-interest max pooling over a fixed H x W grid.

Pools a rectangular region of a convolutional feature map into a fixed
C*H*W vector, so regions of any size feed the same fully connected head.
H = W = 1 degenerates to a per-channel global max over the region (the
structure-free variant used for ablation).

Grid geometry: the region is scaled into feature-map cells by
``spatial_scale`` with half-up rounding; grid cell (i, j) covers rows
[floor(i*h/H), floor((i+1)*h/H)) and the analogous columns of the region.
Cells that quantize to nothing output 0 and receive no gradient.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError


@dataclass(frozen=True)
class ROIPoolConfig:
    grid_h: int = 6
    grid_w: int = 6
    spatial_scale: float = 1.0

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1:
            raise ConfigError("ROI pool grid must be at least 1x1")
        if self.spatial_scale <= 0:
            raise ConfigError("spatial_scale must be positive")

    @property
    def output_dims(self):
        return self.grid_h * self.grid_w

    def to_dict(self):
        return {"grid_h": self.grid_h, "grid_w": self.grid_w,
                "spatial_scale": self.spatial_scale}


def _round_half_up(v):
    return int(np.floor(v + 0.5))


def roi_quantize(roi, cfg, fm_h, fm_w):
    """Scale a region into feature-map cells; returns (y0, x0, h, w).

    h or w may come out 0 for degenerate regions. Raises ConfigError when
    the scaled region misses the feature map entirely.
    """
    x1, y1, x2, y2 = (float(v) for v in roi)
    s = cfg.spatial_scale
    if x1 * s >= fm_w or x2 * s <= 0 or y1 * s >= fm_h or y2 * s <= 0:
        raise ConfigError(
            f"ROI ({x1}, {y1}, {x2}, {y2}) lies outside the {fm_h}x{fm_w} feature map"
        )
    x0 = max(_round_half_up(x1 * s), 0)
    y0 = max(_round_half_up(y1 * s), 0)
    x1c = min(_round_half_up(x2 * s), fm_w)
    y1c = min(_round_half_up(y2 * s), fm_h)
    return y0, x0, max(y1c - y0, 0), max(x1c - x0, 0)


def roi_pool_forward(features, roi, cfg):
    """Max-pool one region of a (C, H, W) feature map onto the grid.

    Returns (vector, state): ``vector`` has length C * grid_h * grid_w laid
    out channel-major (channel, grid row, grid col); ``state`` carries the
    argmax locations for the backward pass.
    """
    features = np.asarray(features)
    if features.ndim != 3:
        raise ConfigError(f"expected (C, H, W) features, got shape {features.shape}")
    c, fm_h, fm_w = features.shape
    y0, x0, h, w = roi_quantize(roi, cfg, fm_h, fm_w)
    gh, gw = cfg.grid_h, cfg.grid_w

    out = np.zeros((c, gh, gw), dtype=features.dtype)
    arg_rows = np.full((c, gh, gw), -1, dtype=np.int64)
    arg_cols = np.full((c, gh, gw), -1, dtype=np.int64)
    for i in range(gh):
        r0 = y0 + (i * h) // gh
        r1 = y0 + ((i + 1) * h) // gh
        if r1 <= r0:
            continue
        for j in range(gw):
            c0 = x0 + (j * w) // gw
            c1 = x0 + ((j + 1) * w) // gw
            if c1 <= c0:
                continue
            patch = features[:, r0:r1, c0:c1].reshape(c, -1)
            flat = patch.argmax(axis=1)
            out[:, i, j] = patch[np.arange(c), flat]
            arg_rows[:, i, j] = r0 + flat // (c1 - c0)
            arg_cols[:, i, j] = c0 + flat % (c1 - c0)

    state = {"arg_rows": arg_rows, "arg_cols": arg_cols,
             "feature_shape": features.shape, "dtype": features.dtype}
    return out.reshape(-1), state


def roi_pool_backward(state, upstream_grad, out=None):
    """Route pooled-output gradients back to their argmax locations.

    ``upstream_grad`` has length C * grid_h * grid_w. When ``out`` is given,
    gradients accumulate into it (several regions may share a feature map);
    otherwise a fresh gradient map is returned.
    """
    if state is None:
        raise UsageError("roi_pool_backward called without forward state")
    arg_rows, arg_cols = state["arg_rows"], state["arg_cols"]
    c, gh, gw = arg_rows.shape
    g = np.asarray(upstream_grad).reshape(c, gh, gw)
    if g.shape != arg_rows.shape:
        raise ConfigError(
            f"upstream gradient shape {np.asarray(upstream_grad).shape} does not match "
            f"pooled output of {arg_rows.size} values"
        )
    if out is None:
        out = np.zeros(state["feature_shape"], dtype=state["dtype"])
    valid = arg_rows >= 0
    ci = np.broadcast_to(np.arange(c)[:, None, None], arg_rows.shape)
    np.add.at(out, (ci[valid], arg_rows[valid], arg_cols[valid]), g[valid])
    return out


def roi_pool_batch(features, rois, cfg):
    """Pool many regions of one feature map; returns (N, C*gh*gw) and states."""
    vecs = []
    states = []
    for roi in rois:
        v, s = roi_pool_forward(features, roi, cfg)
        vecs.append(v)
        states.append(s)
    n = len(vecs)
    c = features.shape[0]
    stacked = (np.stack(vecs) if n else
               np.zeros((0, c * cfg.grid_h * cfg.grid_w), dtype=features.dtype))
    return stacked, states
