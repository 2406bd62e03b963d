"""Four-block convolutional feature extractor.

Each block is ``conv(3x3, stride 2) -> relu -> conv(3x3) -> relu`` so it
halves the spatial extent and doubles the channel count.  The outputs of all
four blocks are returned; the selector consumes every one of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .numerics import Tensor, conv2d, relu

N_BLOCKS = 4


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 1
    base_channels: int = 16
    input_size: int = 64

    def __post_init__(self):
        if self.in_channels < 1:
            raise ConfigurationError("in_channels", f"must be >= 1, got {self.in_channels}")
        if self.base_channels < 1:
            raise ConfigurationError("base_channels", f"must be >= 1, got {self.base_channels}")
        if self.input_size < 2 ** N_BLOCKS or self.input_size % 2 ** N_BLOCKS:
            raise ConfigurationError(
                "input_size", f"must be a positive multiple of {2 ** N_BLOCKS}, got {self.input_size}"
            )

    @property
    def blocks(self) -> int:
        return N_BLOCKS

    def channels(self, block: int) -> int:
        return self.base_channels * 2 ** block

    def spatial(self, block: int) -> int:
        return self.input_size // 2 ** (block + 1)

    def map_shapes(self) -> list:
        return [(self.channels(b), self.spatial(b), self.spatial(b)) for b in range(N_BLOCKS)]


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def conv_weight(rng, c_out: int, c_in: int, k: int = 3) -> np.ndarray:
    return glorot_uniform(rng, (c_out, c_in, k, k), c_in * k * k, c_out * k * k)


class Backbone:
    """Holds the conv weights; :meth:`forward` returns one feature map per block."""

    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params: dict = {}
        c_in = cfg.in_channels
        for b in range(N_BLOCKS):
            c_out = cfg.channels(b)
            self.params[f"block{b}.conv0.weight"] = Tensor(conv_weight(rng, c_out, c_in), True)
            self.params[f"block{b}.conv0.bias"] = Tensor(np.zeros(c_out, np.float32), True)
            self.params[f"block{b}.conv1.weight"] = Tensor(conv_weight(rng, c_out, c_out), True)
            self.params[f"block{b}.conv1.bias"] = Tensor(np.zeros(c_out, np.float32), True)
            c_in = c_out

    def forward(self, image) -> list:
        """``image`` is ``C x S x S`` or ``N x C x S x S``; returns 4 feature maps."""
        x = image if isinstance(image, Tensor) else Tensor(image)
        if x.shape[-2:] != (self.cfg.input_size, self.cfg.input_size):
            raise ConfigurationError(
                "input_size", f"backbone built for {self.cfg.input_size}px, got {x.shape[-2:]}"
            )
        maps = []
        p = self.params
        for b in range(N_BLOCKS):
            x = relu(conv2d(x, p[f"block{b}.conv0.weight"], p[f"block{b}.conv0.bias"], stride=2, pad=1))
            x = relu(conv2d(x, p[f"block{b}.conv1.weight"], p[f"block{b}.conv1.bias"], stride=1, pad=1))
            maps.append(x)
        return maps
