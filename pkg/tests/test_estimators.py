import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fgwk import PluginClassifier
from fgwk.numerics import ContractError, DimensionError

SMALL = dict(base_channels=4, selections=(8, 4, 2, 1), fpn_size=16, batch_size=8)


def toy_data(rng, n=32, size=32):
    """Class decided by which quadrant holds a bright square."""
    X = rng.integers(60, 120, (n, size, size)).astype(np.uint8)
    y = np.arange(n) % 4
    h = size // 2
    for i, c in enumerate(y):
        r, col = (c // 2) * h + 4, (c % 2) * h + 4
        X[i, r:r + 5, col:col + 5] = 250
    return X, y


def test_sklearn_params_roundtrip():
    clf = PluginClassifier(optimizer="lion", lr=1e-3, **SMALL)
    params = clf.get_params()
    assert params["optimizer"] == "lion" and params["fpn_size"] == 16
    assert clone(clf).get_params() == params
    assert clf.set_params(epochs=3).epochs == 3


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        PluginClassifier().predict(np.zeros((1, 32, 32)))


def test_default_lr_by_optimizer():
    assert PluginClassifier(optimizer="sgd").effective_lr == 0.02
    assert PluginClassifier(optimizer="lion").effective_lr == 3e-4
    assert PluginClassifier(optimizer="lion", lr=0.1).effective_lr == 0.1


def test_zero_epochs_is_initialization(rng):
    X, y = toy_data(rng, 8)
    clf = PluginClassifier(epochs=0, **SMALL).fit(X, y)
    ref = PluginClassifier(**SMALL).initialize(4, 32)
    for (name, a), (_, b) in zip(clf.net_.named_parameters(), ref.net_.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)
    assert clf.history_ == []


@pytest.mark.parametrize("opt,lr", [("sgd", 0.02), ("lion", 2e-3)])
def test_memorizes_small_batch(rng, opt, lr):
    X, y = toy_data(rng, 16)
    params = {**SMALL, "base_channels": 8, "batch_size": 4}
    clf = PluginClassifier(optimizer=opt, lr=lr, epochs=30, **params).fit(X, y, X, y)
    assert clf.score(X, y) == 1.0
    assert clf.history_[-1]["train_loss"] < clf.history_[0]["train_loss"]


def test_deterministic_training(rng):
    X, y = toy_data(rng, 16)
    a = PluginClassifier(epochs=2, random_state=5, **SMALL).fit(X, y, X, y)
    b = PluginClassifier(epochs=2, random_state=5, **SMALL).fit(X, y, X, y)
    assert a.history_ == b.history_
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))


def test_best_epoch_weights_restored(rng):
    X, y = toy_data(rng, 16)
    clf = PluginClassifier(epochs=4, **SMALL).fit(X, y, X, y)
    best = max(r["val_accuracy"] for r in clf.history_)
    assert clf.history_[clf.best_epoch_ - 1]["val_accuracy"] == best
    assert clf.score(X, y) == pytest.approx(best)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(rng):
    X, y = toy_data(rng, 16)
    with pytest.raises(ContractError, match="diverged"):
        PluginClassifier(optimizer="sgd", lr=50.0, epochs=5, **SMALL).fit(X, y)


def test_proba_rows_sum_to_one(rng):
    X, _ = toy_data(rng, 6)
    p = PluginClassifier(**SMALL).initialize(4, 32).predict_proba(X)
    assert p.shape == (6, 4)
    np.testing.assert_allclose(p.sum(axis=1), 1, rtol=1e-6)


def test_input_validation(rng):
    clf = PluginClassifier(epochs=1, **SMALL)
    with pytest.raises((DimensionError, ValueError)):
        clf.fit(np.zeros((4, 32, 30)), np.zeros(4, int))
    with pytest.raises((ContractError, ValueError)):
        clf.fit(np.zeros((4, 32, 32)), np.zeros(3, int))
    fitted = clf.fit(*toy_data(rng, 8))
    with pytest.raises((DimensionError, ValueError)):
        fitted.predict(np.zeros((2, 64, 64)))
