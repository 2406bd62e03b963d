"""Optimizers: LION (sign momentum) and plain / momentum SGD."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .numerics import ContractError, Tensor

# Learning rates used with the 384px Swin-T model; the desk profile retunes.
FULL_SCALE_SGD_LR = 5e-4
FULL_SCALE_LION_LR = 5e-6


def lion_step(param: np.ndarray, grad: np.ndarray, momentum: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.99, weight_decay: float = 0.0):
    """One LION update; returns ``(new_param, new_momentum)``.

    The step direction is ``sign(beta1 * m + (1 - beta1) * g)`` with
    ``sign(0) = 0``; decay is applied to the pre-step parameter.
    """
    if param.shape != grad.shape or param.shape != momentum.shape:
        raise ContractError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, momentum {momentum.shape}"
        )
    interp = beta1 * momentum + (1.0 - beta1) * grad
    new_param = param - lr * (np.sign(interp) + weight_decay * param)
    new_momentum = beta2 * momentum + (1.0 - beta2) * grad
    return new_param.astype(param.dtype), new_momentum.astype(momentum.dtype)


def sgd_step(param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if param.shape != grad.shape:
        raise ContractError(f"shape mismatch: param {param.shape}, grad {grad.shape}")
    return (param - lr * grad).astype(param.dtype)


class Optimizer:
    def __init__(self, params: Iterable[Tensor], lr: float):
        self.params = list(params)
        if lr <= 0:
            raise ContractError(f"lr must be positive, got {lr}")
        self.lr = float(lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def state_size(self) -> int:
        """Number of auxiliary buffers held per parameter."""
        return 0


class Lion(Optimizer):
    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.99,
                 weight_decay: float = 0.0):
        super().__init__(params, lr)
        for name, beta in (("beta1", beta1), ("beta2", beta2)):
            if not 0.0 <= beta < 1.0:
                raise ContractError(f"{name} must lie in [0, 1), got {beta}")
        self.beta1, self.beta2 = float(beta1), float(beta2)
        self.weight_decay = float(weight_decay)
        self.momentum = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            p.data, self.momentum[i] = lion_step(
                p.data, p.grad, self.momentum[i], self.lr, self.beta1, self.beta2,
                self.weight_decay)

    def state_size(self) -> int:
        return 1


class SGD(Optimizer):
    def __init__(self, params, lr: float = 0.05, momentum: float = 0.0):
        super().__init__(params, lr)
        if not 0.0 <= momentum < 1.0:
            raise ContractError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = float(momentum)
        self.velocity = [np.zeros_like(p.data) for p in self.params] if momentum else None

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if self.velocity is not None:
                self.velocity[i] = self.momentum * self.velocity[i] + g
                g = self.velocity[i]
            p.data = sgd_step(p.data, g, self.lr)

    def state_size(self) -> int:
        return 1 if self.velocity is not None else 0


def zero_grads(model) -> None:
    """Clear gradients of every parameter of ``model`` (anything with ``parameters()``)."""
    params = model.parameters() if hasattr(model, "parameters") else model
    for p in params:
        p.grad = None


def make_optimizer(kind: str, params, lr: float, beta1: float = 0.9, beta2: float = 0.99,
                   weight_decay: float = 0.0, momentum: float = 0.0) -> Optimizer:
    if kind == "lion":
        return Lion(params, lr=lr, beta1=beta1, beta2=beta2, weight_decay=weight_decay)
    if kind == "sgd":
        return SGD(params, lr=lr, momentum=momentum)
    raise ContractError(f"unknown optimizer {kind!r}; expected 'sgd' or 'lion'")
