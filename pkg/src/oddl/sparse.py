"""l0-constrained sparse coding by Orthogonal Matching Pursuit.

Dictionaries are ``(n_features, n_atoms)`` arrays whose columns are atoms.
Batches of signals passed to the functional API are ``(n_features,
n_signals)`` (one signal per column, matching the dictionary layout);
the :class:`OMPCoder` estimator follows the scikit-learn row convention.
"""

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import InvalidInputError

TIE_TOL = 1e-12
CHOL_TOL = 1e-10
DEFAULT_RESIDUAL_TOL = 1e-10


def check_dictionary(D):
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] < 1 or D.shape[1] < 1:
        raise InvalidInputError(f"dictionary must be a non-empty 2-D array, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise InvalidInputError("dictionary contains non-finite entries")
    return D


def _check_signal(x, n_features):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n_features:
        raise InvalidInputError(
            f"signal of shape {x.shape} does not match dictionary with {n_features} rows"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("signal contains non-finite entries")
    return x


def _check_sparsity(n_nonzero, n_atoms):
    if int(n_nonzero) != n_nonzero or n_nonzero < 0:
        raise InvalidInputError(f"sparsity must be a non-negative integer, got {n_nonzero!r}")
    if n_nonzero > n_atoms:
        raise InvalidInputError(f"sparsity {n_nonzero} exceeds the number of atoms {n_atoms}")
    return int(n_nonzero)


def _select_atom(corr, excluded):
    """Index of the largest |correlation| among allowed atoms, lowest index on ties."""
    masked = np.where(excluded, -np.inf, corr)
    best = masked.max()
    if not np.isfinite(best):
        return -1
    return int(np.flatnonzero(masked >= best - TIE_TOL)[0])


def _extend_cholesky(chol, size, cross, diag_entry, refresh):
    """Append one row to the lower-triangular factor ``chol[:size, :size]``.

    ``cross`` holds the inner products of the new atom with the current
    support.  When the new pivot is too small the factor is rebuilt from
    ``refresh()`` (the full support Gram matrix); returns False if the atom
    is still numerically dependent on the support.
    """
    if size == 0:
        pivot_sq = diag_entry
        if pivot_sq < CHOL_TOL**2:
            return False
        chol[0, 0] = np.sqrt(pivot_sq)
        return True
    w = solve_triangular(chol[:size, :size], cross, lower=True, check_finite=False)
    pivot_sq = diag_entry - w @ w
    if pivot_sq >= CHOL_TOL**2:
        chol[size, :size] = w
        chol[size, size] = np.sqrt(pivot_sq)
        return True
    try:
        fresh = np.linalg.cholesky(refresh())
    except np.linalg.LinAlgError:
        return False
    if fresh[size, size] < CHOL_TOL:
        return False
    chol[: size + 1, : size + 1] = fresh
    return True


def _solve_support(chol, size, rhs):
    lower = chol[:size, :size]
    y = solve_triangular(lower, rhs, lower=True, check_finite=False)
    return solve_triangular(lower.T, y, lower=False, check_finite=False)


def omp(x, D, n_nonzero, residual_tol=DEFAULT_RESIDUAL_TOL):
    """Greedy sparse code of one signal ``x`` over the columns of ``D``.

    At most ``n_nonzero`` atoms are selected; iteration stops early once the
    residual norm drops to ``residual_tol``.  Coefficients on the selected
    support are the least-squares fit, so the final residual is orthogonal
    to every selected atom.

    Returns a dense length-``n_atoms`` coefficient vector.
    """
    D = check_dictionary(D)
    n_features, n_atoms = D.shape
    x = _check_signal(x, n_features)
    n_nonzero = _check_sparsity(n_nonzero, n_atoms)

    code = np.zeros(n_atoms)
    if n_nonzero == 0:
        return code

    support = []
    coef = np.zeros(0)
    excluded = np.zeros(n_atoms, dtype=bool)
    chol = np.zeros((n_nonzero, n_nonzero))
    residual = x.copy()
    while len(support) < n_nonzero:
        res_norm = np.linalg.norm(residual)
        if res_norm <= residual_tol:
            break
        corr = np.abs(D.T @ residual)
        j = _select_atom(corr, excluded)
        if j < 0 or corr[j] <= TIE_TOL * res_norm:
            break
        excluded[j] = True
        atom = D[:, j]
        sub = D[:, support]
        trial = support + [j]
        if not _extend_cholesky(
            chol, len(support), sub.T @ atom, atom @ atom,
            lambda: D[:, trial].T @ D[:, trial],
        ):
            continue
        support.append(j)
        sub = D[:, support]
        coef = _solve_support(chol, len(support), sub.T @ x)
        residual = x - sub @ coef

    code[support] = coef
    return code


def compute_gram(D):
    """Inner products of all atom pairs, exactly symmetric."""
    D = check_dictionary(D)
    G = D.T @ D
    return 0.5 * (G + G.T)


def _gram_omp(x, D, G, corr0, n_nonzero, residual_tol):
    n_atoms = D.shape[1]
    code = np.zeros(n_atoms)
    support = []
    coef = np.zeros(0)
    excluded = np.zeros(n_atoms, dtype=bool)
    chol = np.zeros((n_nonzero, n_nonzero))
    corr = corr0
    res_norm = np.linalg.norm(x)
    while len(support) < n_nonzero:
        if res_norm <= residual_tol:
            break
        abs_corr = np.abs(corr)
        j = _select_atom(abs_corr, excluded)
        if j < 0 or abs_corr[j] <= TIE_TOL * res_norm:
            break
        excluded[j] = True
        trial = support + [j]
        if not _extend_cholesky(
            chol, len(support), G[support, j], G[j, j],
            lambda: G[np.ix_(trial, trial)],
        ):
            continue
        support.append(j)
        coef = _solve_support(chol, len(support), corr0[support])
        corr = corr0 - G[:, support] @ coef
        res_norm = np.linalg.norm(x - D[:, support] @ coef)

    code[support] = coef
    return code


def batch_omp(X, D, n_nonzero, residual_tol=DEFAULT_RESIDUAL_TOL, gram=None):
    """OMP for many signals sharing one dictionary.

    The Gram matrix ``D.T @ D`` is computed once (or taken from ``gram``) and
    residual correlations are updated through it instead of re-projecting
    each residual onto the whole dictionary.

    ``X`` is ``(n_features, n_signals)``; a 1-D ``X`` is treated as a single
    signal.  Returns codes of shape ``(n_atoms, n_signals)``.
    """
    D = check_dictionary(D)
    n_features, n_atoms = D.shape
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != n_features:
        raise InvalidInputError(
            f"signals of shape {X.shape} do not match dictionary with {n_features} rows"
        )
    if X.shape[1] < 1:
        raise InvalidInputError("batch must contain at least one signal")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("signals contain non-finite entries")
    n_nonzero = _check_sparsity(n_nonzero, n_atoms)

    codes = np.zeros((n_atoms, X.shape[1]))
    if n_nonzero == 0:
        return codes
    G = compute_gram(D) if gram is None else np.asarray(gram, dtype=np.float64)
    if G.shape != (n_atoms, n_atoms):
        raise InvalidInputError(f"gram matrix of shape {G.shape} does not match {n_atoms} atoms")
    corr0 = D.T @ X
    for i in range(X.shape[1]):
        codes[:, i] = _gram_omp(X[:, i], D, G, corr0[:, i], n_nonzero, residual_tol)
    return codes


def reconstruct(D, code):
    """``D @ code`` touching only the active atoms."""
    D = check_dictionary(D)
    code = np.asarray(code, dtype=np.float64)
    if code.ndim != 1 or code.shape[0] != D.shape[1]:
        raise InvalidInputError(
            f"code of shape {code.shape} does not match dictionary with {D.shape[1]} atoms"
        )
    active = np.flatnonzero(code)
    return D[:, active] @ code[active]


def support_of(code):
    return np.flatnonzero(code)


class OMPCoder(TransformerMixin, BaseEstimator):
    """Sparse-code samples over a fixed dictionary.

    Parameters
    ----------
    dictionary : array of shape (n_features, n_atoms)
        Atoms as columns.
    n_nonzero : int
        Maximum number of active atoms per code.
    residual_tol : float
        Early-stopping threshold on the residual norm.
    """

    def __init__(self, dictionary=None, n_nonzero=5, residual_tol=DEFAULT_RESIDUAL_TOL):
        self.dictionary = dictionary
        self.n_nonzero = n_nonzero
        self.residual_tol = residual_tol

    def fit(self, X=None, y=None):
        if self.dictionary is None:
            raise InvalidInputError("OMPCoder needs a dictionary")
        self.dictionary_ = check_dictionary(self.dictionary)
        _check_sparsity(self.n_nonzero, self.dictionary_.shape[1])
        self.n_features_in_ = self.dictionary_.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "dictionary_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"X has {X.shape[1]} features, dictionary has {self.n_features_in_} rows"
            )
        return batch_omp(X.T, self.dictionary_, self.n_nonzero, self.residual_tol).T

    def inverse_transform(self, codes):
        check_is_fitted(self, "dictionary_")
        return np.asarray(codes, dtype=np.float64) @ self.dictionary_.T
