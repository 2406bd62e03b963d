import numpy as np
import pytest

from fgwk.backbone import Backbone, BackboneConfig
from fgwk.exceptions import ConfigurationError
from fgwk.model import PluginNet, preprocess, total_loss
from fgwk.numerics import Tensor, check_gradients, sum as tsum
from fgwk.selector import SelectionSchedule


def test_backbone_shapes_at_defaults(rng):
    maps = Backbone(BackboneConfig(), rng).forward(Tensor(np.zeros((1, 64, 64), np.float32)))
    assert [m.shape for m in maps] == [(16, 32, 32), (32, 16, 16), (64, 8, 8), (128, 4, 4)]


@pytest.mark.parametrize("size", [16, 32, 48])
def test_backbone_shape_law(size, rng):
    cfg = BackboneConfig(input_size=size, base_channels=4)
    maps = Backbone(cfg, rng).forward(Tensor(np.zeros((2, 1, size, size), np.float32)))
    for b, m in enumerate(maps):
        assert m.shape == (2, 4 * 2 ** b, size // 2 ** (b + 1), size // 2 ** (b + 1))


def test_backbone_rejects_indivisible_size():
    with pytest.raises(ConfigurationError, match="input_size"):
        BackboneConfig(input_size=60)


def test_zero_image_gives_finite_maps(rng):
    maps = Backbone(BackboneConfig(), rng).forward(Tensor(np.zeros((1, 64, 64), np.float32)))
    assert all(np.isfinite(m.data).all() for m in maps)


def test_backbone_deterministic():
    x = Tensor(np.random.default_rng(5).normal(size=(1, 64, 64)).astype(np.float32))
    a = Backbone(BackboneConfig(), np.random.default_rng(0)).forward(x)
    b = Backbone(BackboneConfig(), np.random.default_rng(0)).forward(x)
    assert all(m.data.tobytes() == n.data.tobytes() for m, n in zip(a, b))


def test_weight_init_limits():
    bb = Backbone(BackboneConfig(), np.random.default_rng(0))
    w = bb.params["block1.conv0.weight"].data
    limit = np.sqrt(6 / (16 * 9 + 32 * 9))
    assert np.abs(w).max() <= limit


def small_net(seed=0, **kw):
    return PluginNet(4, BackboneConfig(base_channels=4, input_size=32),
                     SelectionSchedule((8, 4, 2, 1)), seed=seed, **kw)


def test_every_block_feeds_its_selector_loss(rng):
    net = small_net()
    x = preprocess(rng.integers(0, 256, (2, 32, 32)))
    for b in range(4):
        for p in net.parameters():
            p.grad = None
        res = net(x)
        from fgwk.numerics import cross_entropy

        cross_entropy(res.aux_logits[b], np.array([0, 1])).backward()
        for name, p in net.params.items():
            if name.startswith("backbone.block") and int(name[len("backbone.block")]) <= b:
                assert p.grad is not None and np.abs(p.grad).sum() > 0, name


def test_every_parameter_receives_gradient(rng):
    net = small_net()
    x = preprocess(rng.integers(0, 256, (4, 32, 32)))
    total_loss(net(x), np.array([0, 1, 2, 3])).backward()
    for name, p in net.params.items():
        assert p.grad is not None and np.abs(p.grad).sum() > 0, name


def test_logits_have_class_count(rng):
    res = small_net()(preprocess(rng.integers(0, 256, (3, 32, 32))))
    assert res.logits.shape == (3, 4)
    assert [c.shape for c in res.chosen] == [(3, 8), (3, 4), (3, 2), (3, 1)]


def test_logits_invariant_to_block_order(rng):
    """Complete graph + mean pooling: node order does not matter."""
    from fgwk.combiner import build_graph, gcn_forward, pool_supernode

    nodes = rng.normal(size=(2, 10, 6))
    w = Tensor(rng.normal(size=(6, 6)))
    perm = rng.permutation(10)
    a = pool_supernode(gcn_forward(build_graph(Tensor(nodes)), w)).data
    b = pool_supernode(gcn_forward(build_graph(Tensor(nodes[:, perm])), w)).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_pipeline_gradcheck_fixed_selection(rng):
    net = small_net(seed=3).astype(np.float64)
    x = preprocess(rng.integers(0, 256, (4, 32, 32)), np.float64)
    y = np.array([1, 2, 3, 0])
    chosen = net(x).chosen
    params = [net.params[k] for k in ("backbone.block0.conv0.weight", "selector2.weight",
                                      "fpn1.weight", "gcn.weight", "head.bias")]
    errs = check_gradients(lambda: total_loss(net(x, chosen=chosen), y), params, step=1e-5, max_probes=12)
    assert max(errs) < 5e-3
