"""Fusion of selected points: per-block projection, graph convolution, pooling, head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError
from .numerics import DimensionError, Tensor, concat, linear, matmul, mean, relu

# Full-scale projection widths and their desk-scale stand-ins (same 3:2 ratio).
FPN_ALIASES = {1536: 96, 1024: 64}
DEFAULT_FPN = 96
VARIANT_FPN = 64


def resolve_fpn_size(value, scale: str = "desk") -> int:
    """Map a configured ``fpn_size`` to the projection width actually built.

    At ``desk`` scale the full-scale widths 1536 and 1024 become 96 and 64; other
    values, and every value at ``absolute`` scale, are used as given.
    """
    try:
        width = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError("fpn_size", f"expected an integer, got {value!r}") from None
    if scale == "desk":
        width = FPN_ALIASES.get(width, width)
    if width <= 0:
        raise ConfigurationError("fpn_size", f"must be positive, got {value}")
    return width


@dataclass(frozen=True)
class FpnConfig:
    proj_width: int = DEFAULT_FPN

    def __post_init__(self):
        if self.proj_width <= 0:
            raise ConfigurationError("fpn_size", f"must be positive, got {self.proj_width}")


@dataclass
class FusionGraph:
    nodes: Tensor
    adjacency: np.ndarray


def fpn_project(points_per_block: Sequence, weights: Sequence, biases: Sequence) -> Tensor:
    """Project each block's points to the common width and stack them as nodes.

    Points are ``k_b x C_b`` (or ``N x k_b x C_b``); the result has
    ``sum(k_b)`` rows along the node axis.
    """
    if not (len(points_per_block) == len(weights) == len(biases)):
        raise DimensionError("one projection per block is required")
    projected = []
    for b, (pts, w, bias) in enumerate(zip(points_per_block, weights, biases)):
        if pts.shape[-1] != w.shape[0]:
            raise DimensionError(
                f"block {b}: points have width {pts.shape[-1]}, projection expects {w.shape[0]}"
            )
        projected.append(linear(pts, w, bias))
    return concat(projected, axis=-2)


def complete_adjacency(n: int, dtype=np.float32) -> np.ndarray:
    """Degree-normalised complete graph with self loops, rows summing to 1."""
    if n < 1:
        raise DimensionError("graph needs at least one node")
    a_hat = np.ones((n, n)) + np.eye(n)
    d = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    norm = inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]
    norm /= norm.sum(axis=1, keepdims=True)
    return norm.astype(dtype)


def build_graph(nodes: Tensor) -> FusionGraph:
    return FusionGraph(nodes, complete_adjacency(nodes.shape[-2], nodes.dtype))


def gcn_forward(graph: FusionGraph, weight) -> Tensor:
    """One graph-convolution layer: ``relu(A_hat @ nodes @ W)``."""
    nodes = graph.nodes
    if nodes.shape[-1] != weight.shape[0]:
        raise DimensionError(f"GCN weight {weight.shape} does not fit node width {nodes.shape[-1]}")
    mixed = matmul(Tensor(graph.adjacency), nodes)
    return relu(matmul(mixed, weight))


def pool_supernode(fused: Tensor) -> Tensor:
    """Average all nodes into one super node (column-wise mean)."""
    if fused.shape[-2] < 1:
        raise DimensionError("cannot pool an empty node set")
    return mean(fused, axis=-2)


def predict(pooled: Tensor, weight, bias) -> Tensor:
    if pooled.shape[-1] != weight.shape[0]:
        raise DimensionError(f"head expects width {weight.shape[0]}, got {pooled.shape[-1]}")
    if pooled.ndim == 1:
        return linear(pooled.reshape(1, -1), weight, bias).reshape(-1)
    return linear(pooled, weight, bias)


def concat_reference(points: Sequence) -> Tensor:
    """Stack per-point class-score vectors row-wise into ``N x C'``."""
    rows = [p if isinstance(p, Tensor) else Tensor(p) for p in points]
    rows = [r.reshape(1, -1) if r.ndim == 1 else r for r in rows]
    width = rows[0].shape[-1]
    for r in rows:
        if r.shape[-1] != width:
            raise DimensionError(f"inconsistent point widths {width} and {r.shape[-1]}")
    return concat(rows, axis=0)
