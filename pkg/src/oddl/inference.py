"""Prediction with a trained dictionary/classifier pair and error reporting."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidInputError
from .sparse import batch_omp, check_dictionary, omp, reconstruct


@dataclass
class Model:
    """Trained dictionary ``D`` (n x k) and classifier ``W`` (q x k).

    A reconstructive model has ``q == 0`` and cannot classify.
    """

    D: np.ndarray
    W: np.ndarray
    lambda0: float
    sparsity: int
    class_names: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.D = check_dictionary(self.D)
        W = np.asarray(self.W, dtype=np.float64)
        if W.size == 0:
            W = W.reshape(0, self.D.shape[1])
        if W.ndim != 2 or W.shape[1] != self.D.shape[1]:
            raise InvalidInputError(
                f"classifier {W.shape} does not match dictionary {self.D.shape}"
            )
        self.W = W
        if not self.class_names:
            self.class_names = [str(c) for c in range(W.shape[0])]
        if len(self.class_names) != W.shape[0]:
            raise InvalidInputError(
                f"{len(self.class_names)} class names for {W.shape[0]} classifier rows"
            )

    @property
    def n_features(self):
        return self.D.shape[0]

    @property
    def n_atoms(self):
        return self.D.shape[1]

    @property
    def n_classes(self):
        return self.W.shape[0]


@dataclass(frozen=True)
class Prediction:
    label_index: int
    scores: np.ndarray
    code: np.ndarray = None


def _check_classifier(model, x_len=None):
    if model.n_classes == 0:
        raise InvalidInputError("model has no classifier block (reconstructive mode)")
    if x_len is not None and x_len != model.n_features:
        raise InvalidInputError(
            f"signal has {x_len} features but the model expects {model.n_features}"
        )


def predict(model, x):
    x = np.asarray(x, dtype=np.float64)
    _check_classifier(model, x.shape[0] if x.ndim == 1 else None)
    code = omp(x, model.D, model.sparsity)
    scores = model.W @ code
    return Prediction(int(np.argmax(scores)), scores, code)


def predict_many(model, X):
    """Codes, scores and labels for signals stored one per row.

    Returns ``(labels, scores, codes)`` with ``scores`` of shape
    ``(n_signals, q)`` and ``codes`` of shape ``(n_signals, k)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array of signals, got shape {X.shape}")
    _check_classifier(model, X.shape[1])
    codes = batch_omp(X.T, model.D, model.sparsity).T
    scores = codes @ model.W.T
    return np.argmax(scores, axis=1), scores, codes


@dataclass
class EvaluationReport:
    error_rate: float
    confusion: np.ndarray
    per_class_error: np.ndarray
    mean_residual: float
    class_names: list = field(default_factory=list)

    @property
    def n_samples(self):
        return int(self.confusion.sum())

    def to_dict(self):
        return {
            "class_names": list(self.class_names),
            "confusion": self.confusion.astype(int).tolist(),
            "error_rate": float(self.error_rate),
            "mean_residual": float(self.mean_residual),
            "n_samples": self.n_samples,
            "per_class_error": [None if np.isnan(e) else float(e) for e in self.per_class_error],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self):
        lines = [
            f"error_rate: {self.error_rate:.4f}",
            f"n_samples: {self.n_samples}",
            f"mean_residual: {self.mean_residual:.6f}",
            "per_class_error:",
        ]
        for name, e in zip(self.class_names, self.per_class_error):
            lines.append(f"  {name}: " + ("n/a" if np.isnan(e) else f"{e:.4f}"))
        lines.append("confusion (rows = true, cols = predicted):")
        width = max(len(str(int(self.confusion.max()))) if self.confusion.size else 1, 1)
        for row in self.confusion.astype(int):
            lines.append("  " + " ".join(f"{v:>{width}d}" for v in row))
        return "\n".join(lines)


def evaluate(model, X, labels):
    """Confusion counts and error rates of ``model`` on rows of ``X``."""
    labels = np.asarray(labels, dtype=np.int64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError("evaluation needs a non-empty 2-D array of signals")
    if labels.shape != (X.shape[0],):
        raise InvalidInputError(f"{labels.shape[0]} labels for {X.shape[0]} signals")
    q = model.n_classes
    if labels.min() < 0 or labels.max() >= q:
        raise DataError(f"test labels must lie in [0, {q}) for this model")
    predicted, _, codes = predict_many(model, X)
    confusion = np.zeros((q, q), dtype=np.int64)
    np.add.at(confusion, (labels, predicted), 1)
    totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(totals > 0, 1.0 - np.diag(confusion) / totals, np.nan)
    error_rate = 1.0 - np.trace(confusion) / confusion.sum()
    residuals = [np.linalg.norm(x - reconstruct(model.D, a)) for x, a in zip(X, codes)]
    return EvaluationReport(float(error_rate), confusion, per_class, float(np.mean(residuals)),
                            list(model.class_names))


def predict_patch_ensemble(models, patches, voting="soft"):
    """Combine seven patch models into one identity decision.

    ``voting="soft"`` sums the seven score vectors; ``"hard"`` counts
    per-patch winning labels.  Ties go to the lowest class index.
    """
    if len(models) != 7 or len(patches) != 7:
        raise InvalidInputError(
            f"patch ensemble needs exactly 7 models and patches, got {len(models)} and {len(patches)}"
        )
    preds = [predict(m, p) for m, p in zip(models, patches)]
    q = models[0].n_classes
    if any(m.n_classes != q for m in models):
        raise InvalidInputError("patch models disagree on the number of classes")
    if voting == "soft":
        scores = np.sum([p.scores for p in preds], axis=0)
    elif voting == "hard":
        scores = np.bincount([p.label_index for p in preds], minlength=q).astype(np.float64)
    else:
        raise InvalidInputError(f"voting must be 'soft' or 'hard', got {voting!r}")
    return Prediction(int(np.argmax(scores)), scores, None)
