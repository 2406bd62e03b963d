"""The plug-in network: backbone, per-block selectors and the fusion head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backbone import N_BLOCKS, Backbone, BackboneConfig, glorot_uniform
from .combiner import FpnConfig, build_graph, fpn_project, gcn_forward, pool_supernode, predict
from .numerics import Tensor, add, cross_entropy, mean
from .selector import SelectionSchedule, score_pixels, select_batch

# Fixed input scaling for 8-bit grayscale images.
PIXEL_MEAN = 127.5
PIXEL_SCALE = 64.0


def preprocess(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """``N x S x S`` (or ``N x 1 x S x S``) gray levels -> normalised ``N x 1 x S x S``."""
    x = np.asarray(images, dtype=dtype)
    if x.ndim == 3:
        x = x[:, None]
    return ((x - PIXEL_MEAN) / PIXEL_SCALE).astype(dtype)


@dataclass
class ForwardResult:
    logits: Tensor
    aux_logits: list
    maps: list
    pixel_scores: list
    chosen: list
    confidences: list = field(default_factory=list)


class PluginNet:
    """Parameter container plus forward pass.

    Parameters live in ``self.params`` keyed by dotted names; that ordering is
    the checkpoint ordering.
    """

    def __init__(self, n_classes: int, backbone: BackboneConfig = BackboneConfig(),
                 schedule: SelectionSchedule = SelectionSchedule(),
                 fpn: FpnConfig = FpnConfig(), seed: int = 0):
        self.n_classes = int(n_classes)
        self.backbone_cfg = backbone
        self.schedule = schedule
        self.fpn = fpn
        schedule.validate(backbone.map_shapes())
        rng = np.random.default_rng(seed)
        self.backbone = Backbone(backbone, rng)
        self.params: dict = {f"backbone.{k}": v for k, v in self.backbone.params.items()}
        width = fpn.proj_width
        for b in range(N_BLOCKS):
            c = backbone.channels(b)
            self.params[f"selector{b}.weight"] = Tensor(
                glorot_uniform(rng, (c, n_classes), c, n_classes), True)
            self.params[f"selector{b}.bias"] = Tensor(np.zeros(n_classes, np.float32), True)
        for b in range(N_BLOCKS):
            c = backbone.channels(b)
            self.params[f"fpn{b}.weight"] = Tensor(glorot_uniform(rng, (c, width), c, width), True)
            self.params[f"fpn{b}.bias"] = Tensor(np.zeros(width, np.float32), True)
        self.params["gcn.weight"] = Tensor(glorot_uniform(rng, (width, width), width, width), True)
        self.params["head.weight"] = Tensor(
            glorot_uniform(rng, (width, n_classes), width, n_classes), True)
        self.params["head.bias"] = Tensor(np.zeros(n_classes, np.float32), True)

    def parameters(self) -> list:
        return list(self.params.values())

    def named_parameters(self) -> list:
        return list(self.params.items())

    def astype(self, dtype) -> "PluginNet":
        """Cast every parameter in place (float64 for gradient checks)."""
        for p in self.params.values():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def forward(self, x, chosen=None) -> ForwardResult:
        """Run on a normalised ``N x 1 x S x S`` batch.

        ``chosen`` optionally pins the per-block point indices.
        """
        x = x if isinstance(x, Tensor) else Tensor(x)
        p = self.params
        maps = self.backbone.forward(x)
        scores, aux, picked, confs, points = [], [], [], [], []
        for b, fmap in enumerate(maps):
            s = score_pixels(fmap, p[f"selector{b}.weight"], p[f"selector{b}.bias"])
            pts, idx, conf = select_batch(
                fmap, s, self.schedule.ks[b], None if chosen is None else chosen[b])
            scores.append(s)
            aux.append(mean(s, axis=(2, 3)))
            picked.append(idx)
            confs.append(conf)
            points.append(pts)
        nodes = fpn_project(
            points,
            [p[f"fpn{b}.weight"] for b in range(N_BLOCKS)],
            [p[f"fpn{b}.bias"] for b in range(N_BLOCKS)],
        )
        fused = gcn_forward(build_graph(nodes), p["gcn.weight"])
        logits = predict(pool_supernode(fused), p["head.weight"], p["head.bias"])
        return ForwardResult(logits, aux, maps, scores, picked, confs)

    __call__ = forward


def total_loss(result: ForwardResult, labels) -> Tensor:
    """Combiner cross-entropy plus one auxiliary cross-entropy per selector, unweighted."""
    loss = cross_entropy(result.logits, labels)
    for aux in result.aux_logits:
        loss = add(loss, cross_entropy(aux, labels))
    return loss
