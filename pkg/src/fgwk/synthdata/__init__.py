"""Synthetic fine-grained corpus: rendering, augmentation, curation, storage."""

from .augment import DEFAULT_RANGES, AugmentParams, AugmentRanges, augment_image, transform_rect
from .corpus import (
    DEFAULT_CLASSES,
    SPLITS,
    DatasetSpec,
    LabeledSample,
    Split,
    augment,
    curate,
    downsample,
    generate,
    generate_originals,
    load_spec,
    load_split,
    manifest_hash,
    read_pgm,
    write_pgm,
)
from .render import PATTERNS, mask_patch, render_sample

__all__ = [
    "DEFAULT_CLASSES", "DEFAULT_RANGES", "PATTERNS", "SPLITS", "AugmentParams",
    "AugmentRanges", "DatasetSpec", "LabeledSample", "Split", "augment", "augment_image",
    "curate", "downsample", "generate", "generate_originals", "load_spec", "load_split",
    "manifest_hash", "mask_patch", "read_pgm", "render_sample", "transform_rect", "write_pgm",
]
