"""Signal normalization, label encoding and face patch grids."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .errors import DataError, InvalidInputError

DEGENERATE_TOL = 1e-12
N_FACE_PATCHES = 7


def normalize(signals):
    """Center each signal and scale it to unit l2 norm.

    ``signals`` is a single vector or an ``(n_signals, n_features)`` array.
    Constant signals cannot be normalized; they map to zero and are
    reported in the returned boolean ``degenerate`` mask.

    Returns ``(normalized, degenerate)``.
    """
    X = np.asarray(signals, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] == 0:
        raise InvalidInputError(f"expected non-empty vectors, got shape {np.shape(signals)}")
    centered = X - X.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    degenerate = norms <= DEGENERATE_TOL
    out = np.zeros_like(centered)
    keep = ~degenerate
    out[keep] = centered[keep] / norms[keep, None]
    if single:
        return out[0], bool(degenerate[0])
    return out, degenerate


def one_hot(labels, n_classes):
    """``(n_classes, n_labels)`` indicator matrix, one column per label."""
    labels = np.asarray(labels)
    if labels.ndim == 0:
        labels = labels[None]
    if n_classes < 1:
        raise DataError(f"number of classes must be positive, got {n_classes}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = labels[(labels < 0) | (labels >= n_classes)][0]
        raise DataError(f"label {bad} outside [0, {n_classes})")
    Y = np.zeros((n_classes, labels.size))
    Y[labels.astype(np.int64), np.arange(labels.size)] = 1.0
    return Y


def _band_edges(size, n_bands):
    step = size // n_bands
    edges = [i * step for i in range(n_bands)] + [size]
    return list(zip(edges[:-1], edges[1:]))


def face_strips(image):
    """Raw strips of a 2-D image: 4 horizontal bands then 3 vertical bands.

    The two partitions are independent, so every pixel appears in one
    horizontal and one vertical strip.  Leftover rows/columns go to the last
    band.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvalidInputError(f"expected a 2-D image, got shape {image.shape}")
    h, w = image.shape
    if h < 4 or w < 3:
        raise InvalidInputError(f"image {h}x{w} is smaller than the 4x3 patch grid")
    rows = [image[a:b, :] for a, b in _band_edges(h, 4)]
    cols = [image[:, a:b] for a, b in _band_edges(w, 3)]
    return rows + cols


def extract_face_patches(image):
    """Seven vectorized, normalized patch signals and their degenerate flags."""
    strips = face_strips(image)
    patches, flags = [], []
    for strip in strips:
        p, flag = normalize(strip.astype(np.float64).ravel())
        patches.append(p)
        flags.append(flag)
    return patches, flags


class SignalNormalizer(TransformerMixin, BaseEstimator):
    """Stateless per-sample centering and unit-norm scaling."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64)
        return normalize(X)[0]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags
