"""Rendering of synthetic wrist-like radiographs with a planted class patch.

The global structure (soft-tissue envelope, two bone bands, smooth texture,
sensor noise) is drawn from the same distribution for every class.  Only a
small patch, at most 4% of the image area, carries the label:

    0  ring      hollow bright circle
    1  line      thin dark discontinuity at a random angle
    2  blob      bright filled disk
    3  speckle   dense high-contrast dots
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

PATTERNS = ("ring", "line", "blob", "speckle")
MAX_PATCH_FRACTION = 0.04
PATCH_MARGIN = 8


def patch_side(size: int, rng: np.random.Generator) -> int:
    """Side of a square patch: ~15-19% of the image side, capped by the area limit."""
    cap = int(np.floor(np.sqrt(MAX_PATCH_FRACTION * size * size)))
    lo = max(4, int(round(0.14 * size)))
    hi = max(lo, min(cap, int(round(0.19 * size))))
    return int(rng.integers(lo, hi + 1))


def render_background(size: int, rng: np.random.Generator) -> np.ndarray:
    """Class-independent anatomy as float gray levels."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    u = xx / size
    img = np.full((size, size), 35.0)

    # soft tissue envelope
    cx = 0.5 + rng.uniform(-0.05, 0.05)
    half = rng.uniform(0.30, 0.38)
    tissue = 1.0 / (1.0 + np.exp((np.abs(u - cx) - half) * 40.0))
    img += rng.uniform(45, 60) * tissue

    # two bone bands, slightly tilted, ending at a random height
    tilt = rng.uniform(-0.08, 0.08)
    for centre, width in ((cx - 0.12, 0.10), (cx + 0.11, 0.08)):
        c = centre + rng.uniform(-0.02, 0.02) + tilt * (yy / size - 0.5)
        w = width * rng.uniform(0.85, 1.15)
        band = np.exp(-(((u - c) / (0.5 * w)) ** 4))
        end = rng.uniform(0.15, 0.35)
        band *= 1.0 / (1.0 + np.exp(-(yy / size - end) * 30.0))
        img += rng.uniform(55, 75) * band

    texture = gaussian_filter(rng.normal(size=(size, size)), sigma=size / 16)
    texture /= texture.std() + 1e-12
    img += 8.0 * texture
    img += rng.normal(scale=4.0, size=(size, size))
    return img


def draw_pattern(img: np.ndarray, label: int, rect: tuple, rng: np.random.Generator) -> None:
    """Paint the class pattern inside ``rect = (x, y, w, h)`` (in place)."""
    x, y, w, h = rect
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx)
    radius = (min(w, h) - 1) / 2.0
    region = img[y:y + h, x:x + w]
    kind = PATTERNS[label]
    if kind == "ring":
        ring = np.clip(1.3 - np.abs(r - 0.72 * radius), 0.0, 1.0)
        region += rng.uniform(65, 85) * ring
    elif kind == "line":
        theta = rng.uniform(0, np.pi)
        dist = np.abs((xx - cx) * np.sin(theta) - (yy - cy) * np.cos(theta))
        line = np.clip(1.4 - dist, 0.0, 1.0) * (r <= radius + 0.5)
        region -= rng.uniform(70, 90) * line
    elif kind == "blob":
        disk = np.clip(0.62 * radius + 0.5 - r, 0.0, 1.0)
        region += rng.uniform(85, 110) * disk
    elif kind == "speckle":
        dots = rng.random((h, w)) < 0.35
        signs = np.where(rng.random((h, w)) < 0.5, -1.0, 1.0)
        region += rng.uniform(55, 70) * dots * signs * (r <= radius + 0.5)
    else:  # pragma: no cover - guarded by PATTERNS
        raise ValueError(kind)


def render_sample(size: int, label: int, rng: np.random.Generator):
    """Return ``(uint8 image, patch rect)`` for one original sample."""
    img = render_background(size, rng)
    side = patch_side(size, rng)
    margin = min(PATCH_MARGIN, (size - side) // 2)
    x = int(rng.integers(margin, size - margin - side + 1))
    y = int(rng.integers(margin, size - margin - side + 1))
    rect = (x, y, side, side)
    draw_pattern(img, label, rect, rng)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), rect


def mask_patch(img: np.ndarray, rect: tuple, fill: float | None = None) -> np.ndarray:
    """Copy of ``img`` with ``rect`` overwritten by a flat fill (image median by default)."""
    out = img.copy()
    x, y, w, h = rect
    value = np.median(img) if fill is None else fill
    out[y:y + h, x:x + w] = np.asarray(np.rint(value)).astype(img.dtype)
    return out
