"""scikit-learn facade over the online trainer."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .datasets import Dataset
from .inference import Model, predict_many
from .preprocessing import normalize
from .sparse import batch_omp
from .trainer import TrainerConfig, init_classifier, train


class ODDLClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Online discriminative dictionary learning classifier.

    Learns a dictionary of ``n_atoms`` unit-norm atoms and a linear
    classifier on the sparse codes in a single online pass over the data.
    With ``mode="reconstructive"`` the dictionary is learned without labels
    and a ridge classifier is fitted on the final codes instead.

    Samples are rows of ``X``.  Set ``normalize_input=False`` if ``X`` is
    already centered and unit-norm per sample.

    Attributes
    ----------
    dictionary_ : ndarray of shape (n_features, n_atoms)
    classifier_ : ndarray of shape (n_classes, n_atoms)
    classes_ : ndarray of shape (n_classes,)
    state_ : trainer.ModelState
    """

    def __init__(self, n_atoms=100, sparsity=5, lambda0=1.0, lambda1=0.01, batch_size=1,
                 n_epochs=1, max_sweeps=1, tol=1e-6, init_mode="reconstructive-warmstart",
                 mode="discriminative", replace_dead_atoms=True, normalize_input=True,
                 random_state=0):
        self.n_atoms = n_atoms
        self.sparsity = sparsity
        self.lambda0 = lambda0
        self.lambda1 = lambda1
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.init_mode = init_mode
        self.mode = mode
        self.replace_dead_atoms = replace_dead_atoms
        self.normalize_input = normalize_input
        self.random_state = random_state

    def _config(self):
        seed = self.random_state
        if not isinstance(seed, (int, np.integer)):
            seed = int(np.random.default_rng(seed).integers(2**31))
        return TrainerConfig(
            n_atoms=self.n_atoms, sparsity=self.sparsity, lambda0=self.lambda0,
            lambda1=self.lambda1, batch_size=self.batch_size, n_epochs=self.n_epochs,
            max_sweeps=self.max_sweeps, tol=self.tol, init_mode=self.init_mode,
            mode=self.mode, replace_dead_atoms=self.replace_dead_atoms, seed=int(seed),
        )

    def _prepare(self, X):
        return normalize(X) if self.normalize_input else (X, np.zeros(X.shape[0], dtype=bool))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        Xn, degenerate = self._prepare(X)
        data = Dataset(Xn, encoded, len(self.classes_), degenerate)
        config = self._config()
        self.state_ = train(data, config)
        D = self.state_.D
        if config.mode == "discriminative":
            W = self.state_.W
        else:
            W = init_classifier(D, data, config.sparsity, config.lambda1)
        self.dictionary_ = D
        self.classifier_ = W
        self.model_ = Model(D, W, self.state_.augmented.lambda0, config.sparsity,
                            [str(c) for c in self.classes_])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        _, scores, _ = predict_many(self.model_, self._prepare(X)[0])
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def transform(self, X):
        """Sparse codes of the rows of ``X``, shape ``(n_samples, n_atoms)``."""
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return batch_omp(self._prepare(X)[0].T, self.dictionary_, self.sparsity).T
