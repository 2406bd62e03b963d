import numpy as np
import pytest

from fgwk.backbone import BackboneConfig
from fgwk.explain import (DEFAULT_LAYER, HeatMap, cam_from_activations, grad_cam, jet_colormap,
                          localization_score, overlay, upsample_bilinear, write_ppm)
from fgwk.model import PluginNet
from fgwk.numerics import ContractError, DimensionError
from fgwk.selector import SelectionSchedule


def net(seed=0):
    return PluginNet(4, BackboneConfig(base_channels=4, input_size=32),
                     SelectionSchedule((8, 4, 2, 1)), seed=seed)


class TestCamFormula:
    def test_single_channel_uniform_gradient(self, rng):
        a = rng.normal(size=(1, 3, 3))
        cam = cam_from_activations(a, np.ones_like(a))
        r = np.maximum(a[0], 0)
        np.testing.assert_allclose(cam, (r - r.min()) / (r.max() - r.min()))

    def test_all_negative_gives_zero(self):
        a = -np.ones((2, 4, 4)) - np.arange(16).reshape(4, 4)
        assert not cam_from_activations(a, np.ones_like(a)).any()

    def test_two_channel_hand_case(self):
        a = np.array([[[1.0, 2.0], [3.0, 4.0]], [[0.0, 1.0], [-1.0, 2.0]]])
        g = np.array([[[0.5, 0.5], [0.5, 0.5]], [[-1.0, 1.0], [-2.0, -2.0]]])
        # weights 0.5 and -1.0: 0.5*A0 - A1 = [[0.5, 0], [2.5, 0]]
        s = np.array([[0.5, 0.0], [2.5, 0.0]])
        np.testing.assert_allclose(cam_from_activations(a, g), s / 2.5, atol=1e-6)


def test_upsample_constant_and_range(rng):
    np.testing.assert_allclose(upsample_bilinear(np.full((4, 4), 0.3), 32), 0.3)
    v = rng.random((4, 4))
    up = upsample_bilinear(v, 16)
    assert up.shape == (16, 16) and up.min() >= v.min() - 1e-12 and up.max() <= v.max() + 1e-12


class TestGradCam:
    def test_values_in_unit_interval(self, rng):
        m = net()
        for layer in range(4):
            hm = grad_cam(m, rng.integers(0, 256, (32, 32)), 2, layer=layer)
            assert hm.values.shape == (32, 32)
            assert hm.values.min() >= 0 and hm.values.max() <= 1
            assert hm.source_layer == layer and hm.target_class == 2

    def test_default_layer(self, rng):
        assert grad_cam(net(), rng.integers(0, 256, (32, 32)), 0).source_layer == DEFAULT_LAYER

    def test_zeroed_head_row_gives_zero_map(self, rng):
        m = net()
        m.params["head.weight"].data[:, 1] = 0
        hm = grad_cam(m, rng.integers(0, 256, (32, 32)), 1, layer=3)
        assert not hm.values.any()

    def test_leaves_no_gradients(self, rng):
        m = net()
        grad_cam(m, rng.integers(0, 256, (32, 32)), 0)
        assert all(p.grad is None for p in m.parameters())

    @pytest.mark.parametrize("cls", [-1, 4])
    def test_invalid_class(self, cls, rng):
        with pytest.raises(ContractError):
            grad_cam(net(), rng.integers(0, 256, (32, 32)), cls)

    def test_invalid_layer(self, rng):
        with pytest.raises(ContractError):
            grad_cam(net(), rng.integers(0, 256, (32, 32)), 0, layer=4)


class TestLocalization:
    def test_heat_inside_patch(self):
        v = np.zeros((32, 32))
        v[10:14, 5:9] = 1.0
        s = localization_score(v, (5, 10, 4, 4))
        assert s["hit"] and s["mass_in_patch"] == pytest.approx(1.0)

    def test_uniform_heat_proportional_mass(self):
        s = localization_score(np.ones((50, 50)), (0, 0, 10, 10))
        assert s["mass_in_patch"] == pytest.approx(0.04)

    def test_bimodal_centroid(self):
        v = np.zeros((20, 20))
        v[2, 2] = 1.0
        v[2, 12] = 3.0
        s = localization_score(v, (0, 0, 20, 20))
        # centroid = (2, (2*1 + 12*3) / 4) = (2, 9.5)
        assert s["centroid"] == pytest.approx((2.0, 9.5))

    def test_dilation_boundary(self):
        v = np.zeros((30, 30))
        v[10, 16] = 1.0
        assert localization_score(v, (10, 10, 5, 5), dilate=2)["hit"]
        assert not localization_score(v, (10, 10, 5, 5), dilate=1)["hit"]

    def test_zero_map_is_a_miss(self):
        s = localization_score(np.zeros((8, 8)), (1, 1, 2, 2))
        assert s["hit"] is False and s["mass_in_patch"] == 0.0

    def test_translation_consistent(self, rng):
        v = np.zeros((40, 40))
        v[5:15, 5:15] = rng.random((10, 10))
        a = localization_score(v, (6, 7, 5, 5))
        b = localization_score(np.roll(v, (9, 13), axis=(0, 1)), (19, 16, 5, 5))
        assert a["hit"] == b["hit"]
        assert a["mass_in_patch"] == pytest.approx(b["mass_in_patch"])

    def test_patch_outside_image(self):
        with pytest.raises(ContractError):
            localization_score(np.ones((8, 8)), (6, 6, 4, 4))


class TestOverlay:
    def test_zero_heat_is_gray(self, rng):
        img = rng.integers(0, 256, (8, 8)).astype(np.uint8)
        out = overlay(img, np.zeros((8, 8)))
        assert np.all(out == img[..., None])

    def test_saturated_pixel_top_colour(self):
        v = np.zeros((4, 4))
        v[1, 2] = 1.0
        out = overlay(np.full((4, 4), 100, np.uint8), HeatMap(v, 0, 1))
        np.testing.assert_array_equal(out[1, 2], jet_colormap(np.array(1.0)))

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            overlay(np.zeros((4, 4)), np.zeros((5, 5)))

    def test_deterministic_bytes(self, tmp_path, rng):
        img = rng.integers(0, 256, (8, 8)).astype(np.uint8)
        v = rng.random((8, 8))
        write_ppm(tmp_path / "a.ppm", overlay(img, v))
        write_ppm(tmp_path / "b.ppm", overlay(img, v))
        data = (tmp_path / "a.ppm").read_bytes()
        assert data == (tmp_path / "b.ppm").read_bytes()
        assert data.startswith(b"P6\n8 8\n255\n") and len(data) == 11 + 8 * 8 * 3
