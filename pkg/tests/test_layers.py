import numpy as np
import pytest
from helpers import GRAD_TOL, central_diff, max_rel_err, spaced_random

from persondet.errors import ConfigError, UsageError
from persondet.layers import (LayerSpec, init_params, layer_backward,
                              layer_forward, output_shape)


def test_relu_forward():
    spec = LayerSpec("relu")
    y, _ = layer_forward(spec, {}, np.array([[-1.0, 0.0, 2.0]]))
    assert y.tolist() == [[0.0, 0.0, 2.0]]


def test_relu_backward_trivial():
    spec = LayerSpec("relu")
    x = np.array([[-1.0, 2.0]])
    _, cache = layer_forward(spec, {}, x)
    dx, _ = layer_backward(spec, {}, cache, np.array([[1.0, 3.0]]))
    assert dx.tolist() == [[0.0, 3.0]]


def test_identity_convolution():
    spec = LayerSpec("conv", out_channels=1, kernel=1)
    params = {"W": np.ones((1, 1, 1, 1)), "b": np.zeros(1)}
    x = np.random.default_rng(0).normal(size=(2, 1, 5, 5))
    y, _ = layer_forward(spec, params, x)
    assert np.array_equal(y, x)


def test_maxpool_2x2_example():
    spec = LayerSpec("maxpool", window=2, stride=2)
    x = np.arange(1.0, 17.0).reshape(1, 1, 4, 4)
    y, _ = layer_forward(spec, {}, x)
    # brute-force oracle over each window
    expected = np.array([[x[0, 0, i:i + 2, j:j + 2].max() for j in (0, 2)] for i in (0, 2)])
    assert np.array_equal(y[0, 0], expected)
    assert y[0, 0].tolist() == [[6.0, 8.0], [14.0, 16.0]]


def test_conv_output_shape_arithmetic():
    spec = LayerSpec("conv", out_channels=4, kernel=3, stride=2, pad=1)
    assert output_shape(spec, (3, 9, 9)) == (4, 5, 5)
    pool = LayerSpec("maxpool", window=3, stride=2)
    assert output_shape(pool, (4, 9, 9)) == (4, 4, 4)


def test_conv_shape_mismatch_names_layer():
    spec = LayerSpec("conv", out_channels=2, kernel=3, name="conv_bad")
    rng = np.random.default_rng(0)
    params = init_params(spec, (3, 8, 8), rng)
    with pytest.raises(ConfigError, match="conv_bad"):
        layer_forward(spec, params, np.zeros((1, 5, 8, 8)))


def test_backward_before_forward_raises():
    spec = LayerSpec("relu")
    with pytest.raises(UsageError):
        layer_backward(spec, {}, None, np.zeros((1, 2)))


def test_dropout_keep_one_is_identity():
    spec = LayerSpec("dropout", keep_prob=1.0)
    x = np.random.default_rng(1).normal(size=(3, 7))
    for training in (False, True):
        y, _ = layer_forward(spec, {}, x, training=training, rng=np.random.default_rng(0))
        assert np.array_equal(y, x)


def test_dropout_scales_by_keep_prob():
    spec = LayerSpec("dropout", keep_prob=0.5)
    x = np.ones((4, 1000))
    y, cache = layer_forward(spec, {}, x, training=True, rng=np.random.default_rng(2))
    kept = y[y != 0]
    assert np.allclose(kept, 2.0)  # inverted dropout scaling
    assert abs((y != 0).mean() - 0.5) < 0.05
    # inference mode leaves the input untouched
    y_eval, _ = layer_forward(spec, {}, x, training=False)
    assert np.array_equal(y_eval, x)


def test_spec_validation():
    with pytest.raises(ConfigError):
        LayerSpec("conv", out_channels=0, kernel=3)
    with pytest.raises(ConfigError):
        LayerSpec("maxpool", window=0)
    with pytest.raises(ConfigError):
        LayerSpec("dropout", keep_prob=0.0)
    with pytest.raises(ConfigError):
        LayerSpec("warp")


def _random_case(kind, rng):
    """One random (spec, params, x, training, rng_seed) gradient-check case."""
    if kind == "conv":
        c = int(rng.integers(1, 3))
        oc = int(rng.integers(1, 3))
        k = int(rng.choice([1, 3]))
        stride = int(rng.choice([1, 2]))
        pad = int(rng.integers(0, 2))
        h = int(rng.integers(k + 1, k + 5))
        spec = LayerSpec("conv", out_channels=oc, kernel=k, stride=stride, pad=pad)
        x = spaced_random(rng, (1, c, h, h))
        params = {"W": spaced_random(rng, (oc, c, k, k), -0.5, 0.5, 1e-4),
                  "b": spaced_random(rng, (oc,), -0.5, 0.5, 1e-4)}
        return spec, params, x
    if kind == "relu":
        spec = LayerSpec("relu")
        return spec, {}, spaced_random(rng, (2, int(rng.integers(3, 20))))
    if kind == "maxpool":
        w = int(rng.choice([2, 3]))
        stride = int(rng.choice([1, 2]))
        h = int(rng.integers(w + 1, w + 5))
        spec = LayerSpec("maxpool", window=w, stride=stride)
        return spec, {}, spaced_random(rng, (1, 2, h, h))
    if kind == "fc":
        d = int(rng.integers(2, 10))
        out = int(rng.integers(1, 5))
        spec = LayerSpec("fc", out_dims=out)
        x = spaced_random(rng, (2, d))
        params = {"W": spaced_random(rng, (d, out), -0.5, 0.5, 1e-4),
                  "b": spaced_random(rng, (out,), -0.5, 0.5, 1e-4)}
        return spec, params, x
    if kind == "dropout":
        spec = LayerSpec("dropout", keep_prob=float(rng.choice([0.4, 0.7])))
        return spec, {}, spaced_random(rng, (2, int(rng.integers(3, 20))))
    raise AssertionError(kind)


def check_layer_gradients(kind, seed):
    """FD-check input and parameter gradients for one random instance."""
    rng = np.random.default_rng(seed)
    spec, params, x = _random_case(kind, rng)
    training = kind == "dropout"
    mask_seed = int(rng.integers(0, 2**31))

    def run(x_, params_):
        return layer_forward(spec, params_, x_, training=training,
                             rng=np.random.default_rng(mask_seed))[0]

    y = run(x, params)
    proj = spaced_random(rng, y.shape, -1, 1, 1e-4)

    y2, cache = (layer_forward(spec, params, x, training=training,
                               rng=np.random.default_rng(mask_seed)))
    dx, dparams = layer_backward(spec, params, cache, proj.astype(y2.dtype))

    fd_x = central_diff(lambda v: float((run(v, params) * proj).sum()), x.copy())
    assert max_rel_err(dx, fd_x) < GRAD_TOL, f"{kind} input grad (seed {seed})"
    for name in dparams:
        ref = params[name].copy()

        def f(v, _name=name):
            probe = dict(params)
            probe[_name] = v
            return float((run(x, probe) * proj).sum())

        fd_p = central_diff(f, ref)
        assert max_rel_err(dparams[name], fd_p) < GRAD_TOL, f"{kind}.{name} (seed {seed})"


@pytest.mark.parametrize("kind", ["conv", "relu", "maxpool", "fc", "dropout"])
def test_gradients_match_finite_differences(kind):
    for seed in range(10):
        check_layer_gradients(kind, seed)
