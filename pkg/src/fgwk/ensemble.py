"""Three-variant ensemble combined by hard majority voting."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone

from .combiner import DEFAULT_FPN, VARIANT_FPN
from .estimators import PluginClassifier
from .evalkit import ConfusionMatrix, per_class_metrics
from .exceptions import FormatError
from .numerics import ContractError
from .validation import check_is_fitted


class Variant(enum.Enum):
    BASE = "base"
    LION = "lion"
    LION_FPN = "lionfpn"

    @property
    def optimizer(self) -> str:
        return "sgd" if self is Variant.BASE else "lion"

    @property
    def fpn_size(self) -> int:
        return VARIANT_FPN if self is Variant.LION_FPN else DEFAULT_FPN

    @property
    def seed_offset(self) -> int:
        return list(Variant).index(self)


@dataclass
class VoteRecord:
    votes: list
    confidences: list
    final: int
    tie_broken: bool
    sample_id: str = ""
    true_label: int | None = None
    extra: dict = field(default_factory=dict)


def vote(preds: Sequence) -> VoteRecord:
    """Majority vote over exactly three ``(class, confidence_vector)`` pairs.

    A class named by two or more voters wins.  When all three disagree the
    class with the largest summed confidence wins, lowest index first on ties.
    """
    if len(preds) != 3:
        raise ContractError(f"majority vote needs exactly 3 voters, got {len(preds)}")
    votes = [int(p[0]) for p in preds]
    confs = [np.asarray(p[1], dtype=np.float64) for p in preds]
    width = confs[0].shape
    if any(c.shape != width or c.ndim != 1 for c in confs):
        raise ContractError("voters disagree on the number of classes")
    if any(not 0 <= v < width[0] for v in votes):
        raise ContractError(f"vote outside [0, {width[0]})")
    for v in votes:
        if votes.count(v) >= 2:
            return VoteRecord(votes, confs, v, False)
    # order-independent summation keeps the vote symmetric in its voters
    summed = [math.fsum(c[k] for c in confs) for k in range(width[0])]
    return VoteRecord(votes, confs, int(np.argmax(summed)), True)


def variant_estimator(variant: Variant | str, random_state: int = 0, **overrides) -> PluginClassifier:
    """A :class:`PluginClassifier` configured for one ensemble member."""
    variant = Variant(variant)
    params = dict(optimizer=variant.optimizer, fpn_size=variant.fpn_size,
                  random_state=random_state + variant.seed_offset)
    params.update(overrides)
    return PluginClassifier(**params)


def check_compatible(models: Sequence) -> None:
    """Members must agree on class count and input size."""
    ref = models[0]
    for m in models[1:]:
        for field_name in ("n_classes_", "image_size_"):
            a, b = getattr(ref, field_name), getattr(m, field_name)
            if a != b:
                raise FormatError(field_name.rstrip("_"), f"ensemble members disagree ({a} vs {b})")


class MajorityVoteEnsemble(ClassifierMixin, BaseEstimator):
    """Hard-voting ensemble of three classifiers exposing ``predict_proba``.

    With ``estimators=None`` the three plug-in variants (base, base + LION,
    base + LION + smaller FPN) are built, each with its own seed.
    """

    def __init__(self, estimators=None, random_state=0):
        self.estimators = estimators
        self.random_state = random_state

    def _members(self):
        if self.estimators is not None:
            if len(self.estimators) != 3:
                raise ContractError(f"ensemble needs exactly 3 members, got {len(self.estimators)}")
            return [clone(e) for e in self.estimators]
        return [variant_estimator(v, self.random_state) for v in Variant]

    def fit(self, X, y, X_val=None, y_val=None):
        members = self._members()
        for m in members:
            m.fit(X, y, X_val, y_val)
        self.set_fitted(members)
        return self

    def set_fitted(self, members: Sequence) -> "MajorityVoteEnsemble":
        """Adopt already-trained members (e.g. loaded from checkpoints)."""
        if len(members) != 3:
            raise ContractError(f"ensemble needs exactly 3 members, got {len(members)}")
        check_compatible(members)
        self.estimators_ = list(members)
        self.n_classes_ = members[0].n_classes_
        self.classes_ = np.arange(self.n_classes_)
        return self

    def vote_records(self, X, sample_ids=None, y=None) -> list:
        check_is_fitted(self, "estimators_")
        probas = [m.predict_proba(X) for m in self.estimators_]
        records = []
        for i in range(len(probas[0])):
            rec = vote([(int(p[i].argmax()), p[i]) for p in probas])
            if sample_ids is not None:
                rec.sample_id = sample_ids[i]
            if y is not None:
                rec.true_label = int(y[i])
            records.append(rec)
        return records

    def predict(self, X) -> np.ndarray:
        return np.array([r.final for r in self.vote_records(X)], dtype=np.int64)


def ensemble_eval(models: Sequence, X, y, sample_ids=None) -> tuple:
    """Evaluate three members and their vote; returns ``(reports, records)``.

    ``reports`` maps ``base``, ``lion``, ``lionfpn`` and ``ensemble`` to
    :func:`per_class_metrics` output.
    """
    ens = MajorityVoteEnsemble().set_fitted(list(models))
    y = np.asarray(y)
    records = ens.vote_records(X, sample_ids, y)
    n = ens.n_classes_
    reports = {}
    for k, v in enumerate(Variant):
        preds = [r.votes[k] for r in records]
        reports[v.value] = per_class_metrics(ConfusionMatrix.from_labels(y, preds, n))
    reports["ensemble"] = per_class_metrics(
        ConfusionMatrix.from_labels(y, [r.final for r in records], n))
    return reports, records
