"""Network building blocks: conv, relu, maxpool, fc, dropout.

Each layer is described by a LayerSpec and implemented as a pair of pure
functions, layer_forward and layer_backward, threading an explicit cache
between them. Activations are N x C x H x W for the convolutional stage and
N x D after the first fully connected layer. float32 is the training dtype;
float64 is used for gradient checking.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError

CONV_KINDS = ("conv", "relu", "maxpool")
HEAD_KINDS = ("fc", "relu", "dropout")


@dataclass
class LayerSpec:
    """One layer of the network; fields are kind-specific.

    conv:    out_channels, kernel, stride, pad
    maxpool: window, stride
    fc:      out_dims
    dropout: keep_prob (inverted dropout: active and scaled at train time)
    relu:    no parameters

    ``init_std`` overrides the Gaussian weight init std for conv/fc layers;
    None means He scaling (sqrt(2 / fan_in)).
    """

    kind: str
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    window: int = 0
    out_dims: int = 0
    keep_prob: float = 1.0
    frozen: bool = False
    init_std: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("conv", "relu", "maxpool", "fc", "dropout"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv" and (
            self.out_channels < 1 or self.kernel < 1 or self.stride < 1 or self.pad < 0
        ):
            raise ConfigError(f"bad conv hyperparameters in layer {self.label}")
        if self.kind == "maxpool" and (self.window < 1 or self.stride < 1):
            raise ConfigError(f"bad maxpool hyperparameters in layer {self.label}")
        if self.kind == "fc" and self.out_dims < 1:
            raise ConfigError(f"bad fc out_dims in layer {self.label}")
        if self.kind == "dropout" and not (0.0 < self.keep_prob <= 1.0):
            raise ConfigError(f"dropout keep_prob must be in (0, 1], layer {self.label}")

    @property
    def label(self):
        return self.name or self.kind

    def to_dict(self):
        d = {"kind": self.kind, "name": self.name, "frozen": self.frozen}
        if self.kind == "conv":
            d.update(out_channels=self.out_channels, kernel=self.kernel,
                     stride=self.stride, pad=self.pad, init_std=self.init_std)
        elif self.kind == "maxpool":
            d.update(window=self.window, stride=self.stride)
        elif self.kind == "fc":
            d.update(out_dims=self.out_dims, init_std=self.init_std)
        elif self.kind == "dropout":
            d.update(keep_prob=self.keep_prob)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def output_shape(spec, in_shape):
    """Shape (without the batch dim) produced by a layer on ``in_shape``."""
    if spec.kind == "conv":
        if len(in_shape) != 3:
            raise ConfigError(f"conv layer {spec.label} needs CxHxW input, got {in_shape}")
        c, h, w = in_shape
        oh = (h + 2 * spec.pad - spec.kernel) // spec.stride + 1
        ow = (w + 2 * spec.pad - spec.kernel) // spec.stride + 1
        if oh < 1 or ow < 1:
            raise ConfigError(f"conv layer {spec.label} output collapses on input {in_shape}")
        return (spec.out_channels, oh, ow)
    if spec.kind == "maxpool":
        if len(in_shape) != 3:
            raise ConfigError(f"maxpool layer {spec.label} needs CxHxW input, got {in_shape}")
        c, h, w = in_shape
        oh = (h - spec.window) // spec.stride + 1
        ow = (w - spec.window) // spec.stride + 1
        if oh < 1 or ow < 1:
            raise ConfigError(f"maxpool layer {spec.label} output collapses on input {in_shape}")
        return (c, oh, ow)
    if spec.kind == "fc":
        return (spec.out_dims,)
    return tuple(in_shape)


def init_params(spec, in_shape, rng, dtype=np.float32):
    """Gaussian-initialized parameters for a layer (empty dict if none)."""
    if spec.kind == "conv":
        c = in_shape[0]
        fan_in = c * spec.kernel * spec.kernel
        std = spec.init_std if spec.init_std is not None else np.sqrt(2.0 / fan_in)
        w = rng.normal(0.0, std, size=(spec.out_channels, c, spec.kernel, spec.kernel))
        return {"W": w.astype(dtype), "b": np.zeros(spec.out_channels, dtype=dtype)}
    if spec.kind == "fc":
        d = int(np.prod(in_shape))
        std = spec.init_std if spec.init_std is not None else np.sqrt(2.0 / d)
        w = rng.normal(0.0, std, size=(d, spec.out_dims))
        return {"W": w.astype(dtype), "b": np.zeros(spec.out_dims, dtype=dtype)}
    return {}


def _im2col(x, k, stride, pad):
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((n, c, k, k, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols, oh, ow


def _col2im(dcols, in_shape, k, stride, pad):
    n, c, h, w = in_shape
    oh, ow = dcols.shape[-2:]
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += dcols[:, :, i, j]
    return dxp[:, :, pad : pad + h, pad : pad + w] if pad else dxp


def layer_forward(spec, params, x, training=False, rng=None):
    """Run one layer; returns (output, cache) with cache fed to backward."""
    if spec.kind == "conv":
        if x.ndim != 4 or x.shape[1] != params["W"].shape[1]:
            raise ConfigError(
                f"conv layer {spec.label}: input shape {x.shape} does not match "
                f"weights {params['W'].shape}"
            )
        cols, oh, ow = _im2col(x, spec.kernel, spec.stride, spec.pad)
        y = np.tensordot(params["W"], cols, axes=([1, 2, 3], [1, 2, 3]))
        y = y.transpose(1, 0, 2, 3) + params["b"][None, :, None, None]
        return y, {"cols": cols, "in_shape": x.shape}

    if spec.kind == "relu":
        mask = x > 0
        return np.where(mask, x, 0), {"mask": mask}

    if spec.kind == "maxpool":
        if x.ndim != 4:
            raise ConfigError(f"maxpool layer {spec.label}: expected NCHW input, got {x.shape}")
        cols, oh, ow = _im2col(x, spec.window, spec.stride, 0)
        n, c = x.shape[:2]
        flat = cols.reshape(n, c, spec.window * spec.window, oh, ow)
        arg = flat.argmax(axis=2)
        y = np.take_along_axis(flat, arg[:, :, None], axis=2)[:, :, 0]
        return y, {"arg": arg, "in_shape": x.shape}

    if spec.kind == "fc":
        xf = x.reshape(x.shape[0], -1)
        if xf.shape[1] != params["W"].shape[0]:
            raise ConfigError(
                f"fc layer {spec.label}: input dim {xf.shape[1]} does not match "
                f"weights {params['W'].shape}"
            )
        y = xf @ params["W"] + params["b"]
        return y, {"xf": xf, "in_shape": x.shape}

    if spec.kind == "dropout":
        if not training or spec.keep_prob >= 1.0:
            return x, {"mask": None}
        if rng is None:
            raise UsageError(f"dropout layer {spec.label} needs an rng in training mode")
        mask = (rng.random(x.shape) < spec.keep_prob).astype(x.dtype) / spec.keep_prob
        return x * mask, {"mask": mask}

    raise ConfigError(f"unknown layer kind {spec.kind!r}")


def layer_backward(spec, params, cache, dy):
    """Gradients of one layer; returns (input_grad, param_grads)."""
    if cache is None:
        raise UsageError(f"backward called before forward on layer {spec.label}")

    if spec.kind == "conv":
        cols = cache["cols"]
        db = dy.sum(axis=(0, 2, 3))
        dw = np.tensordot(dy, cols, axes=([0, 2, 3], [0, 4, 5]))
        dcols = np.tensordot(dy, params["W"], axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)
        dx = _col2im(dcols, cache["in_shape"], spec.kernel, spec.stride, spec.pad)
        return dx, {"W": dw, "b": db}

    if spec.kind == "relu":
        return np.where(cache["mask"], dy, 0), {}

    if spec.kind == "maxpool":
        arg = cache["arg"]
        n, c, h, w = cache["in_shape"]
        oh, ow = arg.shape[-2:]
        dx = np.zeros((n, c, h, w), dtype=dy.dtype)
        ni, ci, oi, oj = np.indices(arg.shape, sparse=False)
        rows = oi * spec.stride + arg // spec.window
        cols_ = oj * spec.stride + arg % spec.window
        np.add.at(dx, (ni, ci, rows, cols_), dy)
        return dx, {}

    if spec.kind == "fc":
        xf = cache["xf"]
        dw = xf.T @ dy
        db = dy.sum(axis=0)
        dx = (dy @ params["W"].T).reshape(cache["in_shape"])
        return dx, {"W": dw, "b": db}

    if spec.kind == "dropout":
        mask = cache["mask"]
        return (dy if mask is None else dy * mask), {}

    raise ConfigError(f"unknown layer kind {spec.kind!r}")
