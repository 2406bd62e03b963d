"""scikit-learn compatible estimator wrapping the plug-in network."""

from __future__ import annotations

import logging
import time

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .backbone import BackboneConfig
from .combiner import FpnConfig, resolve_fpn_size
from .model import PluginNet, preprocess, total_loss
from .numerics import ContractError, cross_entropy, no_grad, softmax
from .optim import make_optimizer
from .selector import DESK_SCHEDULE, SelectionSchedule
from .validation import check_images, check_is_fitted, check_labels

logger = logging.getLogger(__name__)

DEFAULT_LR = {"sgd": 0.02, "lion": 3e-4}


class PluginClassifier(ClassifierMixin, BaseEstimator):
    """Fine-grained image classifier: conv backbone + top-k point selection + graph fusion.

    Parameters
    ----------
    n_classes : int or None
        Number of classes; inferred as ``max(y) + 1`` when None.
    base_channels : int
        Channels of the first backbone block (doubled per block).
    selections : tuple of 4 ints
        Points kept per backbone block.
    fpn_size : int
        Projection width of the fusion graph.
    optimizer : {"sgd", "lion"}
    lr : float or None
        Defaults to 0.02 for SGD and 3e-4 for LION.
    momentum : float
        SGD momentum.
    beta1, beta2, weight_decay : float
        LION coefficients.
    batch_size, epochs : int
    random_state : int
        Seeds weight init and batch order.
    """

    def __init__(self, n_classes=None, base_channels=16, selections=DESK_SCHEDULE, fpn_size=96,
                 optimizer="sgd", lr=None, momentum=0.9, beta1=0.9, beta2=0.99,
                 weight_decay=0.0, batch_size=16, epochs=30, random_state=0, verbose=False):
        self.n_classes = n_classes
        self.base_channels = base_channels
        self.selections = selections
        self.fpn_size = fpn_size
        self.optimizer = optimizer
        self.lr = lr
        self.momentum = momentum
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.verbose = verbose

    # -- construction -------------------------------------------------------
    def _build(self, n_classes: int, image_size: int) -> PluginNet:
        return PluginNet(
            n_classes,
            BackboneConfig(in_channels=1, base_channels=self.base_channels, input_size=image_size),
            SelectionSchedule(tuple(self.selections)),
            FpnConfig(resolve_fpn_size(self.fpn_size, "absolute")),
            seed=self.random_state,
        )

    def initialize(self, n_classes: int, image_size: int) -> "PluginClassifier":
        """Build the network without training (epochs=0 equivalent)."""
        self.n_classes_ = int(n_classes)
        self.classes_ = np.arange(self.n_classes_)
        self.image_size_ = int(image_size)
        self.net_ = self._build(self.n_classes_, self.image_size_)
        self.history_ = []
        self.best_epoch_ = 0
        return self

    @property
    def effective_lr(self) -> float:
        return float(self.lr) if self.lr is not None else DEFAULT_LR[self.optimizer]

    # -- training -------------------------------------------------------------
    def fit(self, X, y, X_val=None, y_val=None, on_epoch=None):
        """Train for ``epochs`` epochs, keeping the weights with the best validation accuracy.

        ``on_epoch(record)`` is called after every epoch with the log row.
        """
        X = check_images(X)
        n_classes = self.n_classes if self.n_classes is not None else int(np.max(y)) + 1
        y = check_labels(y, len(X), n_classes)
        has_val = X_val is not None
        if has_val:
            X_val = check_images(X_val, X.shape[1])
            y_val = check_labels(y_val, len(X_val), n_classes)
        self.initialize(n_classes, X.shape[1])
        net = self.net_
        opt = make_optimizer(self.optimizer, net.parameters(), self.effective_lr, self.beta1,
                             self.beta2, self.weight_decay, self.momentum)
        inputs = preprocess(X)
        best_acc, best_params = -1.0, None
        for epoch in range(1, self.epochs + 1):
            start = time.perf_counter()
            order = np.random.default_rng([self.random_state, epoch]).permutation(len(X))
            losses = []
            for lo in range(0, len(order), self.batch_size):
                idx = order[lo:lo + self.batch_size]
                loss = total_loss(net(inputs[idx]), y[idx])
                if not np.isfinite(loss.data):
                    raise ContractError(
                        f"training diverged at epoch {epoch} (non-finite loss); lower lr "
                        f"(currently {self.effective_lr:g})")
                opt.zero_grad()
                loss.backward()
                opt.step()
                losses.append(float(loss.data) * len(idx))
            record = {"epoch": epoch, "train_loss": float(np.sum(losses) / len(X))}
            if has_val:
                logits = self._logits(X_val)
                record["val_loss"] = float(cross_entropy(logits, y_val).data)
                record["val_accuracy"] = float(np.mean(logits.argmax(axis=1) == y_val))
                if record["val_accuracy"] > best_acc:
                    best_acc = record["val_accuracy"]
                    best_params = {k: p.data.copy() for k, p in net.params.items()}
                    self.best_epoch_ = epoch
            else:
                best_params = None
                self.best_epoch_ = epoch
            self.history_.append(record)
            if self.verbose:
                logger.info("epoch %d %s (%.1fs)", epoch, record, time.perf_counter() - start)
            if on_epoch is not None:
                on_epoch(record)
        opt.zero_grad()
        if best_params is not None:
            for k, p in net.params.items():
                p.data = best_params[k]
        return self

    # -- inference ------------------------------------------------------------
    def _logits(self, X, batch: int = 64) -> np.ndarray:
        X = check_images(X, self.image_size_)
        out = []
        with no_grad():
            for lo in range(0, len(X), batch):
                out.append(self.net_(preprocess(X[lo:lo + batch])).logits.data)
        if not out:
            return np.zeros((0, self.n_classes_), np.float32)
        return np.concatenate(out)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self)
        return self._logits(X)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self)
        logits = self._logits(X)
        return softmax(logits, axis=1).data if len(logits) else logits

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)
