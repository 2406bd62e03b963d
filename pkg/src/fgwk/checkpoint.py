"""Binary checkpoint format.

Little-endian layout::

    b"FGWK"                      magic
    u16                          format version
    u32 n, n bytes               JSON config snapshot (UTF-8)
    u32                          parameter count
      u16 n, n bytes             parameter name
      u8 ndim, ndim x u32        shape
      prod(shape) x f32          values, row-major
    u32 n, n bytes               JSON training metadata
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .estimators import PluginClassifier
from .exceptions import FormatError

MAGIC = b"FGWK"
VERSION = 1


def _pack_json(buf: io.BytesIO, obj) -> None:
    raw = json.dumps(obj, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _read(buf: io.BytesIO, n: int, what: str) -> bytes:
    raw = buf.read(n)
    if len(raw) != n:
        raise FormatError(what, "unexpected end of checkpoint")
    return raw


def _unpack_json(buf: io.BytesIO, what: str):
    (n,) = struct.unpack("<I", _read(buf, 4, what))
    try:
        return json.loads(_read(buf, n, what).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(what, f"invalid JSON: {exc}") from None


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(named_params, config: dict, metadata: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    _pack_json(buf, config)
    named_params = list(named_params)
    buf.write(struct.pack("<I", len(named_params)))
    for name, arr in named_params:
        arr = np.asarray(arr)
        raw_name = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    _pack_json(buf, metadata)
    return buf.getvalue()


def decode(data: bytes) -> tuple:
    """Return ``(config, [(name, array)], metadata)``."""
    buf = io.BytesIO(data)
    if _read(buf, 4, "magic") != MAGIC:
        raise FormatError("magic", "not an FGWK checkpoint")
    (version,) = struct.unpack("<H", _read(buf, 2, "version"))
    if version != VERSION:
        raise FormatError("version", f"unsupported format version {version}")
    config = _unpack_json(buf, "config")
    (count,) = struct.unpack("<I", _read(buf, 4, "params"))
    params = []
    for _ in range(count):
        (n,) = struct.unpack("<H", _read(buf, 2, "params"))
        name = _read(buf, n, "params").decode("utf-8")
        (ndim,) = struct.unpack("<B", _read(buf, 1, name))
        shape = struct.unpack(f"<{ndim}I", _read(buf, 4 * ndim, name))
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(_read(buf, 4 * size, name), dtype="<f4").reshape(shape)
        params.append((name, arr.astype(np.float32)))
    metadata = _unpack_json(buf, "metadata")
    if buf.read(1):
        raise FormatError("trailer", "unexpected bytes after metadata")
    return config, params, metadata


def save(path, clf: PluginClassifier, config: dict | None = None,
         metadata: dict | None = None) -> None:
    """Write a fitted classifier; estimator params and shape info travel in the config."""
    snapshot = dict(config or {})
    est = clf.get_params()
    est["selections"] = list(est["selections"])
    snapshot["estimator"] = est
    snapshot["n_classes"] = int(clf.n_classes_)
    snapshot["image_size"] = int(clf.image_size_)
    meta = {"history": getattr(clf, "history_", []),
            "best_epoch": getattr(clf, "best_epoch_", 0)}
    meta.update(metadata or {})
    named = [(name, p.data) for name, p in clf.net_.named_parameters()]
    atomic_write_bytes(path, encode(named, snapshot, meta))


def load(path) -> tuple:
    """Rebuild a classifier from ``path``; returns ``(clf, config, metadata)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    config, params, metadata = decode(path.read_bytes())
    for key in ("estimator", "n_classes", "image_size"):
        if key not in config:
            raise FormatError(key, f"missing from checkpoint config in {path}")
    est = dict(config["estimator"])
    est["selections"] = tuple(est["selections"])
    try:
        clf = PluginClassifier(**est)
    except TypeError as exc:
        raise FormatError("estimator", str(exc)) from None
    clf.initialize(config["n_classes"], config["image_size"])
    expected = clf.net_.params
    names = [n for n, _ in params]
    if names != list(expected):
        missing = [n for n in expected if n not in names] or [n for n in names if n not in expected]
        raise FormatError(missing[0] if missing else "params", "parameter set does not match the model")
    for name, arr in params:
        if arr.shape != expected[name].shape:
            raise FormatError(name, f"shape {arr.shape} != expected {expected[name].shape}")
        expected[name].data = arr.copy()
    clf.history_ = list(metadata.get("history", []))
    clf.best_epoch_ = metadata.get("best_epoch", 0)
    return clf, config, metadata
