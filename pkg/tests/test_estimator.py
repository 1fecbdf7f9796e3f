import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from oddl import ODDLClassifier, SignalNormalizer
from oddl.datasets import make_synthetic


@pytest.fixture(scope="module")
def data():
    train_X, train_y, test_X, test_y, _ = make_synthetic(seed=1, n_train=150, n_test=90)
    names = np.array(["ant", "bee", "cat"])
    return train_X, names[train_y], test_X, names[test_y]


def small(**kw):
    return ODDLClassifier(n_atoms=18, sparsity=3, **kw)


def test_fit_predict_score(data):
    train_X, train_y, test_X, test_y = data
    clf = small().fit(train_X, train_y)
    assert set(clf.predict(test_X)) <= {"ant", "bee", "cat"}
    assert clf.score(test_X, test_y) > 0.8
    assert clf.decision_function(test_X).shape == (90, 3)
    assert clf.dictionary_.shape == (20, 18) and clf.classifier_.shape == (3, 18)
    assert clf.n_features_in_ == 20


def test_transform_is_sparse(data):
    train_X, train_y, test_X, _ = data
    codes = small().fit(train_X, train_y).transform(test_X)
    assert codes.shape == (90, 18)
    assert np.all((codes != 0).sum(axis=1) <= 3)


def test_params_and_clone():
    clf = small(lambda0=0.5)
    params = clf.get_params()
    assert params["n_atoms"] == 18 and params["lambda0"] == 0.5
    twin = clone(clf).set_params(batch_size=4)
    assert twin.get_params()["batch_size"] == 4 and clf.batch_size == 1


def test_deterministic(data):
    train_X, train_y, _, _ = data
    a, b = small(random_state=3).fit(train_X, train_y), small(random_state=3).fit(train_X, train_y)
    assert a.dictionary_.tobytes() == b.dictionary_.tobytes()


def test_pipeline_with_external_normalizer(data):
    train_X, train_y, test_X, test_y = data
    pipe = make_pipeline(SignalNormalizer(), small(normalize_input=False))
    direct = small().fit(train_X, train_y)
    np.testing.assert_array_equal(pipe.fit(train_X, train_y).predict(test_X), direct.predict(test_X))


def test_reconstructive_mode_fits_ridge_after(data):
    train_X, train_y, test_X, test_y = data
    clf = small(mode="reconstructive").fit(train_X, train_y)
    assert clf.classifier_.shape == (3, 18)
    assert clf.score(test_X, test_y) > 0.8


def test_input_validation(data):
    train_X, train_y, test_X, _ = data
    with pytest.raises(NotFittedError):
        small().predict(test_X)
    clf = small().fit(train_X, train_y)
    with pytest.raises(ValueError):
        clf.predict(test_X[:, :10])
    with pytest.raises(ValueError):
        small().fit(train_X, np.linspace(0, 1, len(train_X)))
