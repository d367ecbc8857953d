import numpy as np
import pytest

from persondet.errors import ConfigError
from persondet.layers import LayerSpec
from persondet.network import Network, build_network
from persondet.optim import SGDConfig, init_velocity, sgd_step
from persondet.roi_pool import ROIPoolConfig, roi_pool_batch


def tiny_net(seed=0):
    return build_network("toy", seed=seed)


def test_backbone_rejects_head_kinds():
    with pytest.raises(ConfigError):
        Network([LayerSpec("fc", out_dims=3)], [], ROIPoolConfig())
    with pytest.raises(ConfigError):
        Network([LayerSpec("conv", out_channels=2, kernel=3)],
                [LayerSpec("maxpool", window=2)], ROIPoolConfig())


def test_shapes_chain_through_pipeline():
    net = tiny_net()
    images = np.random.default_rng(0).random((1, 3, 32, 32)).astype(np.float32)
    features, _ = net.forward_backbone(images)
    assert features.shape == (1, 16, 8, 8)
    assert net.spatial_scale == 0.25
    pooled, _ = roi_pool_batch(features[0], [(0, 0, 32, 32)], net.pool_cfg)
    score, bbox, _ = net.forward_head(pooled)
    assert score.shape == (1, 2)
    assert bbox.shape == (1, 4)


def test_init_is_deterministic_under_seed():
    a, b = tiny_net(seed=5), tiny_net(seed=5)
    for key in a.params:
        for name in a.params[key]:
            assert np.array_equal(a.params[key][name], b.params[key][name])
    c = tiny_net(seed=6)
    assert not np.array_equal(a.params["backbone.0"]["W"], c.params["backbone.0"]["W"])


def test_sgd_plain_step():
    params = {"layer": {"W": np.array([1.0])}}
    grads = {"layer": {"W": np.array([1.0])}}
    vel = init_velocity(params)
    sgd_step(params, grads, vel, learning_rate=0.1, momentum=0.0)
    assert params["layer"]["W"][0] == pytest.approx(0.9)


def test_sgd_momentum_two_steps():
    params = {"layer": {"W": np.array([0.0])}}
    grads = {"layer": {"W": np.array([1.0])}}
    vel = init_velocity(params)
    for _ in range(2):
        sgd_step(params, grads, vel, learning_rate=0.1, momentum=0.9)
    assert params["layer"]["W"][0] == pytest.approx(-0.29)


def test_sgd_frozen_layer_untouched():
    params = {"layer": {"W": np.array([1.0, 2.0])}}
    grads = {"layer": {"W": np.array([10.0, 10.0])}}
    vel = init_velocity(params)
    before = params["layer"]["W"].copy()
    sgd_step(params, grads, vel, 0.1, 0.9, frozen_keys=["layer"])
    assert np.array_equal(params["layer"]["W"], before)


def test_frozen_keys_count_conv_layers_only():
    net = tiny_net()
    assert net.conv_layer_count == 2
    assert net.frozen_keys(0) == []
    assert net.frozen_keys(1) == ["backbone.0"]
    assert net.frozen_keys(2) == ["backbone.0", "backbone.3"]
    with pytest.raises(ConfigError):
        net.frozen_keys(3)


def test_sgd_config_validation():
    with pytest.raises(ConfigError):
        SGDConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        SGDConfig(momentum=1.0)
    cfg = SGDConfig(learning_rate=0.1, lr_decay=0.5, lr_decay_every=10)
    assert cfg.rate_at(0) == 0.1
    assert cfg.rate_at(10) == 0.05
    assert cfg.rate_at(25) == 0.025


def test_checkpoint_roundtrip(tmp_path):
    net = tiny_net(seed=3)
    path = tmp_path / "net.ckpt.json"
    net.save(path)
    loaded = Network.load(path)
    for key in net.params:
        for name in net.params[key]:
            assert np.array_equal(net.params[key][name], loaded.params[key][name])
    assert loaded.pool_cfg == net.pool_cfg
    assert [s.to_dict() for s in loaded.backbone] == [s.to_dict() for s in net.backbone]
    assert loaded.rng.bit_generator.state == net.rng.bit_generator.state
    # dropout draws continue identically after reload
    x = np.random.default_rng(0).random((2, 576)).astype(np.float32)
    a = net.forward_head(x, training=True)[0]
    b = loaded.forward_head(x, training=True)[0]
    assert np.array_equal(a, b)


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ConfigError):
        Network.load(path)


def test_forward_backward_full_pipeline_runs():
    net = tiny_net()
    rng = np.random.default_rng(0)
    images = rng.random((1, 3, 32, 32)).astype(np.float32)
    features, bcaches = net.forward_backbone(images, training=True)
    pooled, pstates = roi_pool_batch(features[0], [(0, 0, 32, 32), (4, 4, 20, 28)],
                                     net.pool_cfg)
    score, bbox, hcaches = net.forward_head(pooled, training=True)
    grads = {}
    dpooled = net.backward_head(hcaches, np.ones_like(score), np.ones_like(bbox), grads)
    from persondet.roi_pool import roi_pool_backward
    dfeat = np.zeros_like(features)
    for i, st in enumerate(pstates):
        roi_pool_backward(st, dpooled[i], out=dfeat[0])
    net.backward_backbone(bcaches, dfeat, grads)
    expected_keys = {k for k in net.params if net.params[k]}
    assert expected_keys == set(grads)
    for key, group in grads.items():
        for name, g in group.items():
            assert g.shape == net.params[key][name].shape
            assert np.isfinite(g).all()


def test_astype_float64_for_grad_checking():
    net = tiny_net()
    net64 = net.astype(np.float64)
    assert net64.params["backbone.0"]["W"].dtype == np.float64
    assert np.allclose(net64.params["backbone.0"]["W"],
                       net.params["backbone.0"]["W"])
