"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .numerics import DimensionError


def check_images(X, size: int | None = None) -> np.ndarray:
    """Return ``X`` as a float32 ``N x S x S`` array of gray levels.

    Accepts ``N x S x S`` or ``N x 1 x S x S``; values are expected in 0-255.
    """
    arr = np.asarray(X)
    if arr.ndim == 4 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError(f"expected N x S x S images, got shape {arr.shape}")
    if size is not None and arr.shape[1] != size:
        raise DimensionError(f"model expects {size}px images, got {arr.shape[1]}px")
    if arr.dtype.kind not in "uif":
        raise TypeError(f"image dtype {arr.dtype} is not numeric")
    arr = arr.astype(np.float32, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError("images contain NaN or Inf")
    return arr


def check_labels(y, n_samples: int, n_classes: int | None = None) -> np.ndarray:
    lab = np.asarray(y)
    if lab.ndim != 1 or lab.shape[0] != n_samples:
        raise DimensionError(f"expected {n_samples} labels, got shape {lab.shape}")
    if lab.dtype.kind not in "iu":
        if lab.dtype.kind == "f" and np.all(lab == np.round(lab)):
            lab = lab.astype(np.int64)
        else:
            raise TypeError("labels must be integer class indices")
    if lab.size and lab.min() < 0:
        raise IndexError("labels must be non-negative class indices")
    if n_classes is not None and lab.size and lab.max() >= n_classes:
        raise IndexError(f"label {lab.max()} out of range for {n_classes} classes")
    return lab.astype(np.int64)


def check_is_fitted(estimator, attribute: str = "net_") -> None:
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
