"""Geometric and photometric augmentation with consistent patch tracking."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from ..numerics import ContractError


@dataclass(frozen=True)
class AugmentRanges:
    """Sampling ranges; every draw comes from the caller's generator."""

    rotation_deg: float = 15.0
    shift_frac: float = 0.10
    zoom: tuple = (0.9, 1.1)
    hflip_prob: float = 0.5
    brightness: tuple = (0.8, 1.2)

    def sample(self, rng: np.random.Generator) -> "AugmentParams":
        return AugmentParams(
            rotation_deg=float(rng.uniform(-self.rotation_deg, self.rotation_deg)),
            shift_x=float(rng.uniform(-self.shift_frac, self.shift_frac)),
            shift_y=float(rng.uniform(-self.shift_frac, self.shift_frac)),
            zoom=float(rng.uniform(*self.zoom)),
            hflip=bool(rng.random() < self.hflip_prob),
            brightness=float(rng.uniform(*self.brightness)),
        )

    def contains(self, p: "AugmentParams") -> bool:
        eps = 1e-9
        return (
            abs(p.rotation_deg) <= self.rotation_deg + eps
            and abs(p.shift_x) <= self.shift_frac + eps
            and abs(p.shift_y) <= self.shift_frac + eps
            and self.zoom[0] - eps <= p.zoom <= self.zoom[1] + eps
            and self.brightness[0] - eps <= p.brightness <= self.brightness[1] + eps
        )


DEFAULT_RANGES = AugmentRanges()


@dataclass(frozen=True)
class AugmentParams:
    rotation_deg: float = 0.0
    shift_x: float = 0.0  # fraction of width
    shift_y: float = 0.0  # fraction of height
    zoom: float = 1.0
    hflip: bool = False
    brightness: float = 1.0

    def as_dict(self) -> dict:
        return asdict(self)


def _forward_affine(params: AugmentParams, size: int):
    """Matrix and offset mapping source (row, col) to output (row, col)."""
    theta = np.deg2rad(params.rotation_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    rot = np.array([[cos, -sin], [sin, cos]]) * params.zoom
    centre = np.array([(size - 1) / 2.0] * 2)
    shift = np.array([params.shift_y * size, params.shift_x * size])
    mat = rot
    off = centre + shift - rot @ centre
    if params.hflip:
        flip = np.array([[1.0, 0.0], [0.0, -1.0]])
        mat = flip @ mat
        off = flip @ off + np.array([0.0, size - 1.0])
    return mat, off


def transform_rect(rect: tuple, params: AugmentParams, size: int) -> tuple:
    """Bounding box (clipped to the frame) of a pixel rectangle after the transform."""
    x, y, w, h = rect
    mat, off = _forward_affine(params, size)
    corners = np.array([
        [y - 0.5, x - 0.5], [y - 0.5, x + w - 0.5],
        [y + h - 0.5, x - 0.5], [y + h - 0.5, x + w - 0.5],
    ])
    moved = corners @ mat.T + off
    r0 = int(np.floor(moved[:, 0].min() + 0.5 + 1e-9))
    r1 = int(np.ceil(moved[:, 0].max() - 0.5 - 1e-9))
    c0 = int(np.floor(moved[:, 1].min() + 0.5 + 1e-9))
    c1 = int(np.ceil(moved[:, 1].max() - 0.5 - 1e-9))
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, size - 1), min(c1, size - 1)
    if r1 < r0 or c1 < c0:
        return (0, 0, 0, 0)
    return (c0, r0, c1 - c0 + 1, r1 - r0 + 1)


def rect_centroid_after(rect: tuple, params: AugmentParams, size: int) -> np.ndarray:
    """Transformed (row, col) position of the rectangle's centre."""
    x, y, w, h = rect
    mat, off = _forward_affine(params, size)
    return mat @ np.array([y + (h - 1) / 2.0, x + (w - 1) / 2.0]) + off


def augment_image(img: np.ndarray, params: AugmentParams, fill: float | None = None) -> np.ndarray:
    """Apply ``params`` to a uint8 grayscale image.

    Bilinear resampling; pixels mapped from outside the frame take ``fill``
    (the image median by default).
    """
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ContractError(f"expected a square grayscale image, got shape {img.shape}")
    size = img.shape[0]
    fill = float(np.median(img)) if fill is None else float(fill)
    mat, off = _forward_affine(params, size)
    inv = np.linalg.inv(mat)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    out_coords = np.stack([rows.ravel(), cols.ravel()])
    src = inv @ (out_coords - off[:, None])
    src = np.round(src, 9)  # exact integer coordinates for identity / flips
    warped = map_coordinates(img.astype(np.float64), src, order=1, mode="constant", cval=fill)
    warped = warped.reshape(size, size) * params.brightness
    return np.clip(np.rint(warped), 0, 255).astype(np.uint8)
