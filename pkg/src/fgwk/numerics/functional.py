"""Differentiable operations over :class:`~fgwk.numerics.tensor.Tensor`.

Every function here records a backward closure when any input requires a
gradient.  Broadcasting follows numpy; gradients of broadcast operands are
summed back to the operand's shape.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ContractError, DimensionError, Tensor, as_tensor


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _coerce(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    # python scalars / int arrays adopt the tensor dtype
    if a.dtype != b.dtype:
        if not a.requires_grad and a._backward is None and a.data.ndim == 0:
            a = Tensor(a.data.astype(b.dtype))
        elif not b.requires_grad and b._backward is None and b.data.ndim == 0:
            b = Tensor(b.data.astype(a.dtype))
    return a, b


# -- elementwise -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a, b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return Tensor._make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return Tensor._make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _coerce(a, b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return Tensor._make(ad * bd, (a, b), backward)


def scale(x, factor: float) -> Tensor:
    x = as_tensor(x)
    f = x.data.dtype.type(factor)

    def backward(g):
        return (g * f,)

    return Tensor._make(x.data * f, (x,), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor._make(np.where(mask, x.data, 0).astype(x.dtype), (x,), backward)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return Tensor._make(out, (x,), backward)


def log(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data

    def backward(g):
        return (g / xd,)

    return Tensor._make(np.log(xd), (x,), backward)


# -- reductions and shape ------------------------------------------------------


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._make(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([shape[a] for a in axes]))
    inv = x.dtype.type(1.0 / count)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g * inv, shape).copy(),)

    return Tensor._make(np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    orig = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {orig} into {tuple(shape)}") from exc

    def backward(g):
        return (g.reshape(orig),)

    return Tensor._make(out, (x,), backward)


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    out = np.transpose(x.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inv),)

    return Tensor._make(out, (x,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; all other extents must agree."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            t.shape[i] != ref[i] for i in range(len(ref)) if i != ax
        ):
            raise DimensionError(
                f"concat along axis {axis}: shapes {ref} and {t.shape} disagree"
            )
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
            for i in range(len(tensors))
        )

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=ax), tensors, backward)


def gather(x, index, axis: int = 0) -> Tensor:
    """Select entries of ``x`` along ``axis`` by integer ``index``.

    ``index`` may be 1-D (shared) or carry leading batch dimensions matching
    ``x`` (``take_along_axis`` semantics, with trailing dims broadcast).
    """
    x = as_tensor(x)
    idx = np.asarray(index)
    if idx.dtype.kind not in "iu":
        raise ContractError(f"gather index must be integral, got {idx.dtype}")
    ax = axis % x.ndim
    n = x.shape[ax]
    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise IndexError(f"gather index out of range for axis of length {n}")
    idx = np.where(idx < 0, idx + n, idx)

    if idx.ndim == 1:
        out = np.take(x.data, idx, axis=ax)

        def backward(g):
            grad = np.zeros_like(x.data)
            moved = np.moveaxis(grad, ax, 0)
            np.add.at(moved, idx, np.moveaxis(g, ax, 0))
            return (grad,)

    else:
        if ax != idx.ndim - 1:
            raise ContractError("batched gather needs index.ndim == axis + 1")
        full = idx.reshape(idx.shape + (1,) * (x.ndim - idx.ndim))
        full = np.broadcast_to(full, idx.shape + x.shape[ax + 1:])
        out = np.take_along_axis(x.data, full, axis=ax)

        def backward(g):
            grad = np.zeros_like(x.data)
            lead = np.indices(full.shape, sparse=True)
            coords = list(lead)
            coords[ax] = full
            np.add.at(grad, tuple(coords), g)
            return (grad,)

    return Tensor._make(out, (x,), backward)


# -- linear algebra -------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batching rules; 1-D operands are not promoted."""
    a, b = _coerce(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor._make(ad @ bd, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x``."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"linear input width {x.shape[-1]} does not match weight {weight.shape}"
        )
    lead = x.shape[:-1]
    flat = reshape(x, (-1, x.shape[-1])) if x.ndim != 2 else x
    out = matmul(flat, weight)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, lead + (weight.shape[1],)) if x.ndim != 2 else out


# -- softmax and loss ------------------------------------------------------------


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return Tensor._make(out, (x,), backward)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(out, (x,), backward)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects B x C logits, got {logits.shape}")
    b, c = logits.shape
    if labels.shape != (b,):
        raise DimensionError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.dtype.kind not in "iu" or (labels.size and (labels.min() < 0 or labels.max() >= c)):
        raise IndexError(f"labels must be class indices in [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    rows = np.arange(b)
    loss = -logp[rows, labels].mean()
    probs = np.exp(logp)

    def backward(g):
        grad = probs.copy()
        grad[rows, labels] -= 1
        return (grad * (g / b),)

    return Tensor._make(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


# -- convolution -------------------------------------------------------------------


def conv2d(x, weight, bias=None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation.

    ``x`` is ``C x H x W`` or ``N x C x H x W``; ``weight`` is ``C' x C x k x k``.
    """
    x = as_tensor(x)
    weight = as_tensor(weight)
    if stride < 1:
        raise ContractError(f"stride must be >= 1, got {stride}")
    single = x.ndim == 3
    if single:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects (N,)C,H,W input and 4-D weight, got {x.shape}, {weight.shape}")
    n, c, h, w = x.shape
    co, ci, kh, kw = weight.shape
    if ci != c:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape}, weight {weight.shape}")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise DimensionError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}"
        )
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1

    xd = x.data
    if pad:
        xd = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xd, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo]
    # (N, Ho, Wo, C, kh, kw) -> rows of patches
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    wmat = weight.data.reshape(co, -1)
    out = cols @ wmat.T
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
    out = out.reshape(n, ho, wo, co).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    padded_shape = xd.shape

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, co)
        gw = (g2.T @ cols).reshape(weight.shape)
        gcols = (g2 @ wmat).reshape(n, ho, wo, c, kh, kw)
        gx = np.zeros(padded_shape, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        if pad:
            gx = gx[:, :, pad:-pad, pad:-pad]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    result = Tensor._make(out, parents, backward)
    if single:
        result = reshape(result, result.shape[1:])
    return result


def avg_pool2d(x, size: int) -> Tensor:
    """Non-overlapping ``size x size`` average pooling over the last two axes."""
    x = as_tensor(x)
    h, w = x.shape[-2:]
    if h % size or w % size:
        raise DimensionError(f"avg_pool2d window {size} does not tile {h}x{w}")
    lead = x.shape[:-2]
    y = reshape(x, lead + (h // size, size, w // size, size))
    return mean(y, axis=(-3, -1))
