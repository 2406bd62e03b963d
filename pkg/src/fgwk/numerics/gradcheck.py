"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numeric_grad(fn: Callable[[], Tensor], param: Tensor, step: float = 1e-3,
                 indices: Sequence[int] | None = None) -> np.ndarray:
    """Central differences of the scalar ``fn()`` with respect to ``param``.

    ``param.data`` is perturbed in place and restored.  When ``indices`` is
    given only those flat positions are probed; the rest are left at 0.
    """
    flat = param.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    probe = range(flat.size) if indices is None else indices
    for i in probe:
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn().data)
        flat[i] = orig - step
        lo = float(fn().data)
        flat[i] = orig
        grad[i] = (hi - lo) / (2 * step)
    return grad.reshape(param.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``; 0 when both vanish."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-3,
                    max_probes: int | None = None, rng: np.random.Generator | None = None) -> list:
    """Relative error between backprop and finite differences for each parameter.

    Parameters should hold float64 data; float32 round-off swamps a 1e-3 step.
    """
    for p in params:
        p.grad = None
    fn().backward()
    errors = []
    for p in params:
        analytic = np.zeros(p.shape) if p.grad is None else p.grad.astype(np.float64)
        idx = None
        if max_probes is not None and p.size > max_probes:
            rng = rng or np.random.default_rng(0)
            idx = np.sort(rng.choice(p.size, size=max_probes, replace=False))
            analytic = analytic.reshape(-1)[idx]
            numeric = numeric_grad(fn, p, step, idx).reshape(-1)[idx]
        else:
            numeric = numeric_grad(fn, p, step)
        errors.append(relative_error(analytic, numeric))
    return errors
