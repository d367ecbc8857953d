"""Two-stage detection network: convolutional backbone, ROI pooling, FC head.

The backbone (conv/relu/maxpool) runs once over the whole image; the pooled
region vectors feed the shared head (fc/relu/dropout) and two output
projections, a 2-way person/background score and a 4-value box regression.
The first F conv layers can be frozen during training.

Checkpoint format (version 1, JSON): layer specs for backbone/head/outputs,
the ROI pool grid, and per-layer parameters as little-endian float32 arrays
(base64 raw bytes plus shape), together with the dropout rng state. See
README for the field-by-field layout.
"""

import base64
import json

import numpy as np

from .errors import ConfigError, NumericError
from .layers import (CONV_KINDS, HEAD_KINDS, LayerSpec, init_params,
                     layer_backward, layer_forward, output_shape)
from .roi_pool import ROIPoolConfig

CHECKPOINT_FORMAT = "persondet-checkpoint"
CHECKPOINT_VERSION = 1


class Network:
    """Backbone + ROI pool grid + head with explicit parameter tree.

    Parameters live in ``self.params`` keyed by "backbone.<i>", "head.<i>",
    "score" and "bbox"; each entry is a dict of arrays (W, b). Forward
    passes return caches that the matching backward pass consumes.
    """

    def __init__(self, backbone, head, pool_cfg, seed=0,
                 in_channels=3, dtype=np.float32, out_init_std=0.01):
        for spec in backbone:
            if spec.kind not in CONV_KINDS:
                raise ConfigError(f"backbone layer {spec.label} has kind {spec.kind}; "
                                  f"only {CONV_KINDS} allowed before ROI pooling")
        for spec in head:
            if spec.kind not in HEAD_KINDS:
                raise ConfigError(f"head layer {spec.label} has kind {spec.kind}; "
                                  f"only {HEAD_KINDS} allowed after ROI pooling")
        self.backbone = list(backbone)
        self.head = list(head)
        self.pool_cfg = pool_cfg
        self.seed = seed
        self.in_channels = in_channels
        self.dtype = np.dtype(dtype)
        self.score_spec = LayerSpec("fc", out_dims=2, init_std=out_init_std, name="score")
        self.bbox_spec = LayerSpec("fc", out_dims=4, init_std=out_init_std, name="bbox")
        self.rng = np.random.default_rng(seed)
        self.params = {}
        self._build()

    # -- construction -----------------------------------------------------

    def _build(self):
        rng = np.random.default_rng(self.seed)
        # chain channel counts through the backbone; spatial dims vary per image
        shape = (self.in_channels, 64, 64)
        for i, spec in enumerate(self.backbone):
            p = init_params(spec, shape, rng, self.dtype)
            if p:
                self.params[f"backbone.{i}"] = p
            shape = output_shape(spec, shape)
        self.feature_channels = shape[0]
        head_shape = (self.feature_channels * self.pool_cfg.grid_h * self.pool_cfg.grid_w,)
        for i, spec in enumerate(self.head):
            p = init_params(spec, head_shape, rng, self.dtype)
            if p:
                self.params[f"head.{i}"] = p
            head_shape = output_shape(spec, head_shape)
        self.params["score"] = init_params(self.score_spec, head_shape, rng, self.dtype)
        self.params["bbox"] = init_params(self.bbox_spec, head_shape, rng, self.dtype)

    @property
    def conv_layer_count(self):
        return sum(1 for s in self.backbone if s.kind == "conv")

    @property
    def spatial_scale(self):
        scale = 1.0
        for s in self.backbone:
            if s.kind in ("conv", "maxpool"):
                scale /= s.stride
        return scale

    def frozen_keys(self, fixed_layers):
        """Parameter keys of the first ``fixed_layers`` conv layers."""
        if fixed_layers > self.conv_layer_count:
            raise ConfigError(
                f"fixed_layers={fixed_layers} exceeds the {self.conv_layer_count} "
                f"conv layers in the backbone"
            )
        keys = []
        seen = 0
        for i, spec in enumerate(self.backbone):
            if spec.kind == "conv":
                if seen < fixed_layers:
                    keys.append(f"backbone.{i}")
                seen += 1
        return keys

    # -- forward / backward ------------------------------------------------

    def forward_backbone(self, images, training=False):
        """Run the conv stage on an (N, C, H, W) batch; returns (features, caches)."""
        x = np.ascontiguousarray(images, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ConfigError(
                f"expected (N, {self.in_channels}, H, W) images, got {x.shape}"
            )
        caches = []
        for i, spec in enumerate(self.backbone):
            x, cache = layer_forward(spec, self.params.get(f"backbone.{i}", {}), x,
                                     training=training, rng=self.rng)
            caches.append(cache)
        return x, caches

    def backward_backbone(self, caches, dfeatures, grads):
        dx = dfeatures
        for i in reversed(range(len(self.backbone))):
            spec = self.backbone[i]
            dx, g = layer_backward(spec, self.params.get(f"backbone.{i}", {}), caches[i], dx)
            if g:
                grads[f"backbone.{i}"] = g
        return dx

    def forward_head(self, pooled, training=False):
        """Run the FC stage on (N, C*gh*gw) pooled vectors.

        Returns (score_logits, bbox_pred, caches).
        """
        x = np.ascontiguousarray(pooled, dtype=self.dtype)
        caches = []
        for i, spec in enumerate(self.head):
            x, cache = layer_forward(spec, self.params.get(f"head.{i}", {}), x,
                                     training=training, rng=self.rng)
            caches.append(cache)
        score, score_cache = layer_forward(self.score_spec, self.params["score"], x)
        bbox, bbox_cache = layer_forward(self.bbox_spec, self.params["bbox"], x)
        caches.append((score_cache, bbox_cache))
        return score, bbox, caches

    def backward_head(self, caches, dscore, dbbox, grads):
        score_cache, bbox_cache = caches[-1]
        dx_s, g = layer_backward(self.score_spec, self.params["score"], score_cache, dscore)
        grads["score"] = g
        dx_b, g = layer_backward(self.bbox_spec, self.params["bbox"], bbox_cache, dbbox)
        grads["bbox"] = g
        dx = dx_s + dx_b
        for i in reversed(range(len(self.head))):
            spec = self.head[i]
            dx, g = layer_backward(spec, self.params.get(f"head.{i}", {}), caches[i], dx)
            if g:
                grads[f"head.{i}"] = g
        return dx

    # -- utilities ----------------------------------------------------------

    def astype(self, dtype):
        """Copy of this network with parameters cast to ``dtype``."""
        clone = Network(self.backbone, self.head, self.pool_cfg, seed=self.seed,
                        in_channels=self.in_channels, dtype=dtype)
        for key, group in self.params.items():
            clone.params[key] = {n: a.astype(dtype) for n, a in group.items()}
        clone.rng = np.random.default_rng()
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone

    def check_finite(self):
        for key, group in self.params.items():
            for name, arr in group.items():
                if not np.isfinite(arr).all():
                    raise NumericError(f"non-finite values in parameter {key}.{name}")

    # -- checkpoint io -------------------------------------------------------

    def save(self, path):
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "in_channels": self.in_channels,
            "seed": self.seed,
            "backbone": [s.to_dict() for s in self.backbone],
            "head": [s.to_dict() for s in self.head],
            "roi_pool": self.pool_cfg.to_dict(),
            "rng_state": _encode_rng_state(self.rng.bit_generator.state),
            "params": {
                key: {name: _encode_array(arr) for name, arr in group.items()}
                for key, group in self.params.items()
            },
        }
        with open(path, "w") as f:
            json.dump(doc, f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            doc = json.load(f)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(f"{path} is not a network checkpoint")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {doc.get('version')}")
        net = cls(
            [LayerSpec.from_dict(d) for d in doc["backbone"]],
            [LayerSpec.from_dict(d) for d in doc["head"]],
            ROIPoolConfig(**doc["roi_pool"]),
            seed=doc["seed"],
            in_channels=doc["in_channels"],
        )
        for key, group in doc["params"].items():
            net.params[key] = {name: _decode_array(enc) for name, enc in group.items()}
        net.rng = np.random.default_rng()
        net.rng.bit_generator.state = _decode_rng_state(doc["rng_state"])
        return net


def _encode_array(arr):
    arr32 = np.ascontiguousarray(arr, dtype="<f4")
    return {"shape": list(arr.shape), "dtype": "<f4",
            "data": base64.b64encode(arr32.tobytes()).decode("ascii")}


def _decode_array(enc):
    raw = base64.b64decode(enc["data"])
    return np.frombuffer(raw, dtype=enc["dtype"]).reshape(enc["shape"]).astype(np.float32)


def _encode_rng_state(state):
    # PCG64 state is a nested dict of (big) ints; Python json handles both ways
    return state


def _decode_rng_state(doc):
    return doc


# -- profiles ----------------------------------------------------------------

def build_network(profile="toy", grid_h=6, grid_w=6, seed=0, dropout_keep=0.5):
    """Construct a named desk-scale architecture.

    toy:   2 conv layers (8, 16 channels), two 2x2 pools, one 64-wide fc.
    small: 3 conv layers (16, 32, 64 channels), three 2x2 pools, 128-wide fc.
    """
    if profile == "toy":
        backbone = [
            LayerSpec("conv", out_channels=8, kernel=3, stride=1, pad=1, name="conv1"),
            LayerSpec("relu", name="relu1"),
            LayerSpec("maxpool", window=2, stride=2, name="pool1"),
            LayerSpec("conv", out_channels=16, kernel=3, stride=1, pad=1, name="conv2"),
            LayerSpec("relu", name="relu2"),
            LayerSpec("maxpool", window=2, stride=2, name="pool2"),
        ]
        head = [
            LayerSpec("fc", out_dims=64, name="fc1"),
            LayerSpec("relu", name="fc1_relu"),
            LayerSpec("dropout", keep_prob=dropout_keep, name="drop1"),
        ]
        scale = 0.25
    elif profile == "small":
        backbone = [
            LayerSpec("conv", out_channels=16, kernel=3, stride=1, pad=1, name="conv1"),
            LayerSpec("relu", name="relu1"),
            LayerSpec("maxpool", window=2, stride=2, name="pool1"),
            LayerSpec("conv", out_channels=32, kernel=3, stride=1, pad=1, name="conv2"),
            LayerSpec("relu", name="relu2"),
            LayerSpec("maxpool", window=2, stride=2, name="pool2"),
            LayerSpec("conv", out_channels=64, kernel=3, stride=1, pad=1, name="conv3"),
            LayerSpec("relu", name="relu3"),
            LayerSpec("maxpool", window=2, stride=2, name="pool3"),
        ]
        head = [
            LayerSpec("fc", out_dims=128, name="fc1"),
            LayerSpec("relu", name="fc1_relu"),
            LayerSpec("dropout", keep_prob=dropout_keep, name="drop1"),
        ]
        scale = 0.125
    else:
        raise ConfigError(f"unknown network profile {profile!r}; use 'toy' or 'small'")
    pool = ROIPoolConfig(grid_h=grid_h, grid_w=grid_w, spatial_scale=scale)
    return Network(backbone, head, pool, seed=seed)
