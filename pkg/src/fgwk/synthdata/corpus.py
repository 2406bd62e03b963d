"""Corpus specification, curation into splits, and on-disk layout.

Layout::

    <root>/<split>/<class_name>/<sample_id>.pgm
    <root>/manifest.tsv
    <root>/dataset.json        # specification snapshot
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..exceptions import ConfigurationError, FormatError
from .augment import DEFAULT_RANGES, AugmentParams, AugmentRanges, augment_image, transform_rect
from .render import PATTERNS, render_sample

SPLITS = ("train", "val", "test1", "test2")
DEFAULT_CLASSES = ("boneanomaly", "fracture", "metal", "softtissue")
MANIFEST_COLUMNS = (
    "sample_id", "split", "class", "patch_x", "patch_y", "patch_w", "patch_h",
    "provenance", "source_id", "rotation_deg", "shift_x", "shift_y", "zoom", "hflip",
    "brightness",
)


def _half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class DatasetSpec:
    classes: tuple = DEFAULT_CLASSES
    image_size: int = 64
    originals_per_class: int = 200
    train_per_class: int = 500
    test1_per_class: int = 120
    test2_per_class: tuple = (17, 25, 15, 23)
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    downsample: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.classes = tuple(self.classes)
        if isinstance(self.test2_per_class, int):
            self.test2_per_class = (self.test2_per_class,) * len(self.classes)
        self.test2_per_class = tuple(int(v) for v in self.test2_per_class)
        self.downsample = dict(self.downsample)
        self.validate()

    def validate(self) -> None:
        names = self.classes
        if not (2 <= len(names) <= len(PATTERNS)):
            raise ConfigurationError("classes", f"need 2 to {len(PATTERNS)} class names, got {len(names)}")
        if any(not isinstance(n, str) or not n.strip() for n in names):
            raise ConfigurationError("classes", "class names must be non-empty strings")
        if len(set(names)) != len(names):
            raise ConfigurationError("classes", f"duplicate class names in {names}")
        if self.image_size < 16 or self.image_size % 16:
            raise ConfigurationError("image_size", f"must be a multiple of 16, got {self.image_size}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigurationError("val_fraction", f"must lie strictly in (0, 1), got {self.val_fraction}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError("test_fraction", f"must lie strictly in (0, 1), got {self.test_fraction}")
        if len(self.test2_per_class) != len(names):
            raise ConfigurationError("test2_per_class", "need one count per class")
        if any(t < 0 for t in self.test2_per_class):
            raise ConfigurationError("test2_per_class", "counts must be non-negative")
        if any(t > self.test1_per_class for t in self.test2_per_class):
            raise ConfigurationError("test2_per_class", "test2 counts may not exceed test1_per_class")
        for key in ("originals_per_class", "train_per_class", "test1_per_class"):
            if getattr(self, key) < 1:
                raise ConfigurationError(key, "must be >= 1")
        unknown = set(self.downsample) - set(names)
        if unknown:
            raise ConfigurationError("downsample", f"unknown classes {sorted(unknown)}")

    def split_counts(self) -> dict:
        """Expected per-class image counts for each split."""
        val = _half_up(self.val_fraction * self.train_per_class)
        counts = {}
        for c, name in enumerate(self.classes):
            train = self.train_per_class - val
            if name in self.downsample:
                train = min(train, int(self.downsample[name]))
            counts[name] = {"train": train, "val": val, "test1": self.test1_per_class,
                            "test2": self.test2_per_class[c]}
        return counts

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["test2_per_class"] = list(self.test2_per_class)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(sorted(extra)[0], "unknown dataset key")
        if "classes" in d and not d["classes"]:
            raise ConfigurationError("classes", "missing class names")
        return cls(**d)


@dataclass
class LabeledSample:
    sample_id: str
    image: np.ndarray
    label: int
    patch: tuple
    provenance: str = "original"
    source_id: str = ""
    split: str = ""
    augment: AugmentParams | None = None

    def __post_init__(self):
        if not self.source_id:
            self.source_id = self.sample_id


def generate_originals(spec: DatasetSpec) -> dict:
    """Render ``originals_per_class`` samples per class, one derived seed per sample."""
    out = {}
    for c, name in enumerate(spec.classes):
        samples = []
        for i in range(spec.originals_per_class):
            rng = np.random.default_rng([spec.seed, 0, c, i])
            img, rect = render_sample(spec.image_size, c, rng)
            samples.append(LabeledSample(f"{name}_{i:04d}", img, c, rect))
        out[name] = samples
    return out


def augment(sample: LabeledSample, params: AugmentParams, sample_id: str) -> LabeledSample:
    """Augmented copy of ``sample``; the patch rectangle follows the transform."""
    size = sample.image.shape[0]
    img = augment_image(sample.image, params)
    rect = transform_rect(sample.patch, params, size)
    return LabeledSample(sample_id, img, sample.label, rect, "augmented",
                         sample.source_id, sample.split, params)


def _fill_to(sources: list, count: int, split: str, rng: np.random.Generator,
             ranges: AugmentRanges) -> list:
    """Originals first, then augmented copies cycling over the sources."""
    out = []
    for s in sources[:count]:
        out.append(LabeledSample(s.sample_id, s.image, s.label, s.patch, "original",
                                 s.source_id, split))
    j = 0
    while len(out) < count:
        src = sources[j % len(sources)]
        params = ranges.sample(rng)
        aug = augment(src, params, f"{src.sample_id}_a{j:03d}")
        aug.split = split
        out.append(aug)
        j += 1
    return out


def downsample(samples: Iterable[LabeledSample], class_label: int, limit: int) -> list:
    """Keep at most ``limit`` samples of ``class_label``; others pass through."""
    kept, seen = [], 0
    for s in samples:
        if s.label == class_label:
            if seen >= limit:
                continue
            seen += 1
        kept.append(s)
    return kept


def curate(originals: dict, spec: DatasetSpec, ranges: AugmentRanges = DEFAULT_RANGES) -> dict:
    """Partition originals by source and fill every split to its target count.

    Test originals are split between test2 (kept as-is) and the sources of
    the augmented test1 set; the remaining originals are divided into train
    and validation sources.  Augmented images stay in their source's split.
    """
    counts = spec.split_counts()
    splits = {s: [] for s in SPLITS}
    for c, name in enumerate(spec.classes):
        pool = list(originals[name])
        n = len(pool)
        order = np.random.default_rng([spec.seed, 2, c]).permutation(n)
        pool = [pool[i] for i in order]
        n_test = _half_up(spec.test_fraction * n)
        t2 = spec.test2_per_class[c]
        if n_test < t2 + 1:
            raise ConfigurationError(
                "originals_per_class",
                f"class {name!r}: {n_test} test originals cannot cover {t2} test2 images plus test1 sources",
            )
        n_trainval = n - n_test
        n_val = _half_up(spec.val_fraction * n_trainval)
        if n_val < 1 or n_trainval - n_val < 1:
            raise ConfigurationError(
                "originals_per_class", f"class {name!r}: too few originals for train/val sources"
            )
        test2_src = pool[:t2]
        test1_src = pool[t2:n_test]
        val_src = pool[n_test:n_test + n_val]
        train_src = pool[n_test + n_val:]
        for split, sources in (("train", train_src), ("val", val_src),
                               ("test1", test1_src), ("test2", test2_src)):
            k = counts[name][split]
            if k == 0:
                continue
            rng = np.random.default_rng([spec.seed, 1, c, SPLITS.index(split)])
            splits[split].extend(_fill_to(sources, k, split, rng, ranges))
    return splits


# -- I/O -------------------------------------------------------------------------------


def write_pgm(path: Path, img: np.ndarray) -> None:
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise FormatError("pgm", f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError("pgm", f"{path}: maxval {maxval} unsupported")
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise FormatError("pgm", f"{path}: truncated pixel data")
    return data.reshape(h, w).copy()


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def write_corpus(root, spec: DatasetSpec, splits: dict, extra_meta: dict | None = None) -> Path:
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for split in SPLITS:
            for name in spec.classes:
                (root / split / name).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {root}: {exc}") from exc
    rows = []
    for split in SPLITS:
        for s in splits[split]:
            name = spec.classes[s.label]
            write_pgm(root / split / name / f"{s.sample_id}.pgm", s.image)
            p = s.augment or AugmentParams()
            rows.append([
                s.sample_id, split, name, *map(str, s.patch), s.provenance, s.source_id,
                _fmt(p.rotation_deg), _fmt(p.shift_x), _fmt(p.shift_y), _fmt(p.zoom),
                str(int(p.hflip)), _fmt(p.brightness),
            ])
    with open(root / "manifest.tsv", "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    meta = {"dataset": spec.to_dict(), "seed": spec.seed,
            "augment_ranges": {k: list(v) if isinstance(v, tuple) else v
                               for k, v in asdict(DEFAULT_RANGES).items()}}
    if extra_meta:
        meta.update(extra_meta)
    (root / "dataset.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return root


def generate(spec: DatasetSpec, root, extra_meta: dict | None = None) -> dict:
    """Render, curate and write a corpus; returns the in-memory splits."""
    splits = curate(generate_originals(spec), spec)
    write_corpus(root, spec, splits, extra_meta)
    return splits


def manifest_hash(root) -> str:
    return hashlib.sha256((Path(root) / "manifest.tsv").read_bytes()).hexdigest()


@dataclass
class Split:
    """A loaded split as arrays, ready for the estimators."""

    images: np.ndarray
    labels: np.ndarray
    patches: np.ndarray
    sample_ids: list
    provenance: list
    classes: tuple

    def __len__(self) -> int:
        return len(self.labels)


def load_spec(root) -> DatasetSpec:
    path = Path(root) / "dataset.json"
    if not path.exists():
        raise FormatError("dataset.json", f"no corpus at {root}")
    return DatasetSpec.from_dict(json.loads(path.read_text())["dataset"])


def load_split(root, split: str) -> Split:
    root = Path(root)
    if split not in SPLITS:
        raise ConfigurationError("split", f"unknown split {split!r}; expected one of {SPLITS}")
    spec = load_spec(root)
    manifest = root / "manifest.tsv"
    if not manifest.exists():
        raise FormatError("manifest.tsv", f"missing in {root}")
    images, labels, patches, ids, prov = [], [], [], [], []
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise FormatError("manifest.tsv", "unexpected column layout")
        for row in reader:
            if row["split"] != split:
                continue
            name = row["class"]
            if name not in spec.classes:
                raise FormatError("class", f"manifest class {name!r} not in dataset classes")
            images.append(read_pgm(root / split / name / f"{row['sample_id']}.pgm"))
            labels.append(spec.classes.index(name))
            patches.append([int(row[k]) for k in ("patch_x", "patch_y", "patch_w", "patch_h")])
            ids.append(row["sample_id"])
            prov.append(row["provenance"])
    size = spec.image_size
    arr = np.stack(images) if images else np.zeros((0, size, size), np.uint8)
    return Split(arr, np.asarray(labels, dtype=np.int64),
                 np.asarray(patches, dtype=np.int64).reshape(-1, 4), ids, prov, spec.classes)


def corpus_exists(root) -> bool:
    return os.path.exists(Path(root) / "manifest.tsv")
