"""Shared test oracles: finite differences and well-spaced random tensors."""

import numpy as np

FD_STEP = 1e-5
GRAD_TOL = 1e-4


def central_diff(f, x, step=FD_STEP):
    """Central finite-difference gradient of scalar f at x (in-place probes)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        fp = f(x)
        x[idx] = orig - step
        fm = f(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * step)
    return g


def max_rel_err(a, b, floor=1e-3):
    """Max elementwise relative error with a floor for near-zero gradients."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def spaced_random(rng, shape, lo=-1.0, hi=1.0, min_gap=1e-3):
    """Random tensor whose values are pairwise separated by >= min_gap.

    Keeps finite differences valid across max/relu kinks: probing +-1e-5
    never crosses an argmax switch or a zero crossing.
    """
    n = int(np.prod(shape))
    grid = np.arange(lo, hi, min_gap)
    grid = grid[np.abs(grid) > 10 * min_gap]  # keep clear of the relu kink
    if len(grid) < n:
        raise ValueError("grid too small for requested tensor")
    vals = rng.choice(grid, size=n, replace=False)
    return vals.reshape(shape)
