"""Grad-CAM heatmaps, localisation scoring against known patches, and overlays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backbone import N_BLOCKS
from .model import PluginNet, preprocess
from .numerics import ContractError, DimensionError, Tensor

LAST_BLOCK = 3
# 16x16 block: the deepest map fine enough to resolve a small patch at desk scale
DEFAULT_LAYER = 1
OVERLAY_ALPHA = 0.4


@dataclass
class HeatMap:
    values: np.ndarray
    target_class: int
    source_layer: int


def cam_from_activations(activations: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """``relu(sum_k w_k A_k)`` with ``w_k`` the spatial mean of ``dScore/dA_k``.

    Both inputs are ``C x h x w``; the result is min-max normalised to [0, 1]
    and a constant map (including all-zero) becomes all-zero.
    """
    if activations.shape != gradients.shape or activations.ndim != 3:
        raise DimensionError(
            f"activations {activations.shape} and gradients {gradients.shape} must be matching C x h x w"
        )
    weights = gradients.mean(axis=(1, 2))
    cam = np.maximum(np.tensordot(weights, activations, axes=1), 0.0)
    lo, hi = cam.min(), cam.max()
    if hi - lo <= 0:
        return np.zeros_like(cam, dtype=np.float64)
    return ((cam - lo) / (hi - lo)).astype(np.float64)


def upsample_bilinear(values: np.ndarray, size: int) -> np.ndarray:
    """Resize an ``h x w`` map to ``size x size`` with half-pixel-centre bilinear sampling."""
    h, w = values.shape

    def axis_weights(n_in):
        pos = (np.arange(size) + 0.5) * n_in / size - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    r0, r1, fr = axis_weights(h)
    c0, c1, fc = axis_weights(w)
    top = values[r0][:, c0] * (1 - fc) + values[r0][:, c1] * fc
    bottom = values[r1][:, c0] * (1 - fc) + values[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bottom * fr[:, None]


def grad_cam(model, image: np.ndarray, target_class: int, layer: int = DEFAULT_LAYER) -> HeatMap:
    """Grad-CAM of ``target_class`` over backbone block ``layer`` for one ``S x S`` image.

    ``model`` is a :class:`PluginNet` or a fitted estimator exposing ``net_``.
    Parameter gradients are left cleared.
    """
    net: PluginNet = getattr(model, "net_", model)
    if not 0 <= target_class < net.n_classes:
        raise ContractError(f"target_class {target_class} outside [0, {net.n_classes})")
    if not 0 <= layer < N_BLOCKS:
        raise ContractError(f"layer {layer} outside the backbone's blocks")
    img = np.asarray(image)
    if img.ndim == 3:
        img = img[0]
    x = preprocess(img[None], dtype=net.params["head.weight"].dtype)
    result = net(Tensor(x))
    fmap = result.maps[layer]
    selector = np.zeros(result.logits.shape, dtype=result.logits.dtype)
    selector[0, target_class] = 1.0
    result.logits.backward(selector)
    grads = np.zeros_like(fmap.data) if fmap.grad is None else fmap.grad
    cam = cam_from_activations(fmap.data[0].astype(np.float64), grads[0].astype(np.float64))
    for p in net.parameters():
        p.grad = None
    values = np.clip(upsample_bilinear(cam, img.shape[-1]), 0.0, 1.0)
    return HeatMap(values, int(target_class), layer)


def localization_score(heatmap, patch: tuple, dilate: int = 2, decile: float = 0.9) -> dict:
    """Hit test and in-patch heat fraction for a heatmap and a patch ``(x, y, w, h)``.

    The centroid is the heat-weighted mean position of pixels at or above the
    ``decile`` quantile of heat; it hits when it falls inside the patch grown
    by ``dilate`` pixels on every side.
    """
    values = heatmap.values if isinstance(heatmap, HeatMap) else np.asarray(heatmap, dtype=np.float64)
    x, y, w, h = (int(v) for v in patch)
    size_r, size_c = values.shape
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > size_c or y + h > size_r:
        raise ContractError(f"patch {patch} does not lie inside a {size_r}x{size_c} image")
    total = float(values.sum())
    if total <= 0:
        return {"hit": False, "mass_in_patch": 0.0, "centroid": (float("nan"), float("nan"))}
    thresh = np.quantile(values, decile)
    top = np.where((values >= thresh) & (values > 0), values, 0.0)
    rows, cols = np.indices(values.shape)
    cr = float((top * rows).sum() / top.sum())
    cc = float((top * cols).sum() / top.sum())
    hit = (y - dilate - 0.5 <= cr <= y + h - 1 + dilate + 0.5) and (
        x - dilate - 0.5 <= cc <= x + w - 1 + dilate + 0.5)
    mass = float(values[y:y + h, x:x + w].sum() / total)
    return {"hit": bool(hit), "mass_in_patch": mass, "centroid": (cr, cc)}


def jet_colormap(t: np.ndarray) -> np.ndarray:
    """Piecewise-linear 'jet': 0 -> dark blue, 0.5 -> green-yellow, 1 -> dark red. uint8 RGB."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4 * t - 3), 0, 1)
    g = np.clip(1.5 - np.abs(4 * t - 2), 0, 1)
    b = np.clip(1.5 - np.abs(4 * t - 1), 0, 1)
    return np.rint(np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


def overlay(image: np.ndarray, heatmap, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Blend the colour-mapped heat over the grayscale image; ``S x S x 3`` uint8.

    Pixels with zero heat keep the plain gray value; elsewhere the colour is
    mixed in with weight ``alpha``, and saturated heat (1.0) shows the map's
    top colour.
    """
    values = heatmap.values if isinstance(heatmap, HeatMap) else np.asarray(heatmap, dtype=np.float64)
    img = np.asarray(image)
    if img.shape != values.shape:
        raise DimensionError(f"image {img.shape} and heatmap {values.shape} differ in size")
    gray = np.repeat(img.astype(np.float64)[..., None], 3, axis=-1)
    colour = jet_colormap(values).astype(np.float64)
    weight = np.where(values >= 1.0, 1.0, alpha * (values > 0))[..., None]
    return np.clip(np.rint((1 - weight) * gray + weight * colour), 0, 255).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())
