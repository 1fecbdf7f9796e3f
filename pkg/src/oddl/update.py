"""Joint dictionary/classifier update by block-coordinate descent.

The dictionary ``D`` (n x k) and classifier ``W`` (q x k) are stacked into
one augmented matrix whose bottom block holds ``sqrt(lambda0) * W``.  Past
samples are summarized by two running sums, ``M = sum(a a^T)`` and
``N = sum(x_aug a^T)``, so each update needs no stored history.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InvalidInputError

USAGE_EPS = 1e-10


@dataclass
class AugmentedDictionary:
    """``columns`` is ``(n + q, k)``: atoms on top, ``sqrt(lambda0) * W`` below."""

    columns: np.ndarray
    n_features: int
    n_classes: int
    lambda0: float

    @property
    def n_atoms(self):
        return self.columns.shape[1]

    @property
    def top(self):
        return self.columns[: self.n_features]

    @property
    def bottom(self):
        return self.columns[self.n_features :]

    def copy(self):
        return AugmentedDictionary(self.columns.copy(), self.n_features, self.n_classes, self.lambda0)


def augment(D, W, lambda0):
    """Stack ``D`` over ``sqrt(lambda0) * W``.

    ``W`` may have zero rows, which gives the purely reconstructive problem.
    """
    if not lambda0 > 0:
        raise ConfigError(f"lambda0 must be positive, got {lambda0!r}")
    D = np.asarray(D, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1 and W.size == 0:
        W = W.reshape(0, D.shape[1])
    if D.ndim != 2 or W.ndim != 2 or D.shape[1] != W.shape[1]:
        raise InvalidInputError(
            f"dictionary {D.shape} and classifier {W.shape} must have the same number of columns"
        )
    columns = np.vstack([D, np.sqrt(lambda0) * W])
    return AugmentedDictionary(columns, D.shape[0], W.shape[0], float(lambda0))


def split(Dt):
    """Inverse of :func:`augment`: returns copies of ``(D, W)``."""
    return Dt.top.copy(), Dt.bottom / np.sqrt(Dt.lambda0)


def augment_signal(x, y, lambda0):
    """Stack a signal over its scaled one-hot label (``y`` may be empty)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.concatenate([x, np.sqrt(lambda0) * y], axis=0)


@dataclass
class Accumulators:
    M: np.ndarray
    N: np.ndarray
    samples_seen: int = 0

    @classmethod
    def zeros(cls, n_atoms, n_rows):
        return cls(np.zeros((n_atoms, n_atoms)), np.zeros((n_rows, n_atoms)), 0)

    def copy(self):
        return Accumulators(self.M.copy(), self.N.copy(), self.samples_seen)


def accumulate(acc, xt, code):
    """Add one coded sample to ``acc`` in place and return it.

    Only the rows/columns belonging to the code's support are touched.
    """
    xt = np.asarray(xt, dtype=np.float64)
    code = np.asarray(code, dtype=np.float64)
    k = acc.M.shape[0]
    if code.shape != (k,) or xt.shape != (acc.N.shape[0],):
        raise InvalidInputError(
            f"sample {xt.shape} / code {code.shape} do not match accumulators "
            f"M {acc.M.shape}, N {acc.N.shape}"
        )
    active = np.flatnonzero(code)
    if active.size:
        a = code[active]
        acc.M[np.ix_(active, active)] += np.outer(a, a)
        acc.N[:, active] += np.outer(xt, a)
    acc.samples_seen += 1
    return acc


def surrogate_objective(Dt, acc):
    """``Tr(Dt^T Dt M) - 2 Tr(Dt^T N)``.

    This is the summed squared residual over all accumulated samples minus
    the constant ``sum ||x_aug||^2``.
    """
    C = Dt.columns
    return float(np.sum((C.T @ C) * acc.M) - 2.0 * np.sum(C * acc.N))


def _check_pair(Dt, acc):
    if acc.M.shape != (Dt.n_atoms, Dt.n_atoms) or acc.N.shape != Dt.columns.shape:
        raise InvalidInputError(
            f"accumulators M {acc.M.shape}, N {acc.N.shape} do not match "
            f"augmented dictionary {Dt.columns.shape}"
        )


def _normalize_column(Dt, j):
    scale = np.linalg.norm(Dt.columns[: Dt.n_features, j])
    if scale > 0:
        Dt.columns[:, j] /= scale


def bcd_sweep(Dt, acc, normalize=True, usage_eps=USAGE_EPS, normalize_inside=True):
    """One pass of exact column-wise minimization over all atoms, in place.

    Column ``j`` with ``M[j, j] > usage_eps`` becomes
    ``(N[:, j] - C @ M[:, j]) / M[j, j] + C[:, j]``; less-used columns are
    left alone.  With ``normalize`` set the atom part of each updated column
    is rescaled to unit norm and the classifier part by the same factor,
    either right after that column's update (``normalize_inside``) or once
    after the loop.

    Returns ``(Dt, max_column_change)``.
    """
    _check_pair(Dt, acc)
    C = Dt.columns
    M, N = acc.M, acc.N
    before = C.copy() if normalize and not normalize_inside else None
    max_change = 0.0
    updated = []
    for j in range(Dt.n_atoms):
        mjj = M[j, j]
        if mjj <= usage_eps:
            continue
        old = C[:, j].copy()
        C[:, j] += (N[:, j] - C @ M[:, j]) / mjj
        if normalize and normalize_inside:
            _normalize_column(Dt, j)
        updated.append(j)
        max_change = max(max_change, float(np.linalg.norm(C[:, j] - old)))
    if before is not None:
        for j in updated:
            _normalize_column(Dt, j)
        if updated:
            max_change = float(np.max(np.linalg.norm(C[:, updated] - before[:, updated], axis=0)))
    return Dt, max_change


class UpdateResult(NamedTuple):
    dictionary: AugmentedDictionary
    converged: bool
    n_sweeps: int
    max_change: float


def bcd_update(Dt, acc, tol=1e-6, max_sweeps=100, normalize=True, usage_eps=USAGE_EPS,
               normalize_inside=True, callback=None):
    """Repeat :func:`bcd_sweep` until the largest column change is below ``tol``.

    ``callback(sweep_index, Dt)`` is invoked after every sweep.  Hitting
    ``max_sweeps`` is reported through ``UpdateResult.converged``.
    """
    if acc.samples_seen < 1:
        raise InvalidInputError("bcd_update needs at least one accumulated sample")
    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        _, change = bcd_sweep(Dt, acc, normalize, usage_eps, normalize_inside)
        if callback is not None:
            callback(sweep, Dt)
        if change < tol:
            return UpdateResult(Dt, True, sweep, change)
    return UpdateResult(Dt, False, max_sweeps, change)
