"""Weakly supervised selector.

Every spatial position of a feature map is classified by a per-block linear
head.  A position's confidence is its largest softmax probability; the ``k``
most confident positions are kept and their feature vectors gathered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError
from .numerics import ContractError, DimensionError, Tensor, gather, linear, reshape, transpose

FULL_SCALE_SCHEDULE = (2048, 512, 128, 32)
DESK_SCHEDULE = (32, 16, 8, 4)


@dataclass(frozen=True)
class SelectionSchedule:
    ks: tuple = DESK_SCHEDULE

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if len(ks) != 4 or any(k < 1 for k in ks):
            raise ConfigurationError("selections", f"need 4 positive counts, got {self.ks}")
        object.__setattr__(self, "ks", ks)

    def validate(self, map_shapes: Sequence[tuple]) -> None:
        for b, (k, shape) in enumerate(zip(self.ks, map_shapes)):
            n = shape[-1] * shape[-2]
            if k > n:
                raise ConfigurationError(
                    "selections", f"block {b} keeps {k} points but its map has only {n}"
                )

    @property
    def total(self) -> int:
        return sum(self.ks)


@dataclass
class SelectionResult:
    """Indices are flat positions ``i * W + j``; ``points`` is ``k x C``."""

    sorted_indices: np.ndarray
    chosen: np.ndarray
    points: Tensor | None
    confidences: np.ndarray


def flatten_map(fmap) -> Tensor:
    """``(N,) C x H x W`` -> ``(N,) H*W x C`` (one row per feature point)."""
    fmap = fmap if isinstance(fmap, Tensor) else Tensor(fmap)
    if fmap.ndim == 3:
        c, h, w = fmap.shape
        return transpose(reshape(fmap, (c, h * w)), (1, 0))
    n, c, h, w = fmap.shape
    return transpose(reshape(fmap, (n, c, h * w)), (0, 2, 1))


def score_pixels(fmap, weight, bias) -> Tensor:
    """Per-pixel class logits, returned as ``(N,) C' x H x W``."""
    fmap = fmap if isinstance(fmap, Tensor) else Tensor(fmap)
    weight = weight if isinstance(weight, Tensor) else Tensor(weight)
    c = fmap.shape[-3]
    if weight.shape[0] != c:
        raise DimensionError(f"selector head expects width {weight.shape[0]}, map has {c} channels")
    h, w = fmap.shape[-2:]
    logits = linear(flatten_map(fmap), weight, bias)  # (N,) HW x C'
    if logits.ndim == 2:
        return reshape(transpose(logits, (1, 0)), (weight.shape[1], h, w))
    return reshape(transpose(logits, (0, 2, 1)), (logits.shape[0], weight.shape[1], h, w))


def pixel_confidence(scores) -> np.ndarray:
    """Max-class softmax probability per pixel; shape ``(N,) H x W``.

    Confidence only ranks points, so it is computed outside the graph.
    """
    s = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    shifted = s - s.max(axis=-3, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=-3, keepdims=True)).max(axis=-3)


def argsort_desc(conf: np.ndarray) -> np.ndarray:
    """Descending order along the last axis, ties by ascending index."""
    return np.argsort(-conf, axis=-1, kind="stable")


def rank_and_select(conf, k: int) -> SelectionResult:
    """Sort the ``H x W`` confidences (flattened) and keep the first ``k``."""
    p = np.asarray(conf.data if isinstance(conf, Tensor) else conf).reshape(-1)
    n = p.size
    if not 1 <= k <= n:
        raise ContractError(f"k must lie in [1, {n}], got {k}")
    order = argsort_desc(p)
    chosen = order[:k].copy()
    return SelectionResult(order, chosen, None, p[chosen])


def gather_points(fmap, chosen) -> Tensor:
    """Feature vectors at flat positions ``chosen``: ``k x C`` (or batched)."""
    flat = flatten_map(fmap)
    chosen = np.asarray(chosen)
    n = flat.shape[-2]
    if chosen.size and (chosen.min() < 0 or chosen.max() >= n):
        raise IndexError(f"point index out of range for a map with {n} positions")
    return gather(flat, chosen, axis=flat.ndim - 2)


def select_batch(fmaps: Tensor, scores: Tensor, k: int, chosen: np.ndarray | None = None):
    """Batched selection: returns ``(points N x k x C, chosen N x k, confidences N x k)``.

    Pass ``chosen`` to reuse a fixed selection (used by gradient checks,
    where the piecewise-constant ranking must not flip under perturbation).
    """
    conf = pixel_confidence(scores).reshape(scores.shape[0], -1)
    if not 1 <= k <= conf.shape[1]:
        raise ContractError(f"k must lie in [1, {conf.shape[1]}], got {k}")
    if chosen is None:
        chosen = argsort_desc(conf)[:, :k]
    points = gather(flatten_map(fmaps), chosen, axis=1)
    return points, chosen, np.take_along_axis(conf, chosen, axis=1)
