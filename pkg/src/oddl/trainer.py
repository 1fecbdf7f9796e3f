"""Online training loop for the joint dictionary/classifier model.

Each iteration draws a mini-batch from a seeded per-epoch permutation,
sparse-codes it on the current dictionary, folds the codes into the
running sums and re-fits the augmented dictionary column by column.
``mode="reconstructive"`` runs the same loop with the label block removed.
"""

import hashlib
import json
import time
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve

from .errors import ConfigError, InvalidInputError
from .inference import Model
from .preprocessing import one_hot
from .sparse import batch_omp, omp
from .update import (
    USAGE_EPS,
    Accumulators,
    AugmentedDictionary,
    accumulate,
    augment,
    bcd_update,
    split,
    surrogate_objective,
)

MODES = ("discriminative", "reconstructive")
INIT_MODES = ("random-sample", "reconstructive-warmstart")


@dataclass
class TrainerConfig:
    """Hyper-parameters of one training run.

    ``n_epochs`` full passes are made unless ``max_samples`` caps the total
    number of samples drawn.  ``max_sweeps``/``tol`` bound the inner
    block-coordinate loop run after every mini-batch.
    """

    n_atoms: int = 100
    sparsity: int = 5
    lambda0: float = 1.0
    lambda1: float = 0.01
    batch_size: int = 1
    n_epochs: int = 1
    max_samples: Optional[int] = None
    seed: int = 0
    tol: float = 1e-6
    max_sweeps: int = 1
    init_mode: str = "reconstructive-warmstart"
    mode: str = "discriminative"
    residual_tol: float = 1e-10
    usage_eps: float = USAGE_EPS
    normalize_inside: bool = True
    replace_dead_atoms: bool = True
    log_every: int = 0

    def validate(self, n_classes=None):
        def require(cond, msg):
            if not cond:
                raise ConfigError(msg)

        require(self.mode in MODES, f"mode must be one of {MODES}, got {self.mode!r}")
        require(self.init_mode in INIT_MODES,
                f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        require(int(self.n_atoms) == self.n_atoms and self.n_atoms >= 1, "n_atoms must be >= 1")
        require(int(self.sparsity) == self.sparsity and 1 <= self.sparsity <= self.n_atoms,
                f"sparsity must lie in [1, n_atoms={self.n_atoms}], got {self.sparsity}")
        require(self.mode == "reconstructive" or self.lambda0 > 0, "lambda0 must be positive")
        require(self.lambda1 > 0, "lambda1 must be positive")
        require(int(self.batch_size) == self.batch_size and self.batch_size >= 1,
                "batch_size must be >= 1")
        require(int(self.n_epochs) == self.n_epochs and self.n_epochs >= 0, "n_epochs must be >= 0")
        require(self.max_samples is None or self.max_samples >= 0, "max_samples must be >= 0")
        require(self.tol > 0, "tol must be positive")
        require(int(self.max_sweeps) == self.max_sweeps and self.max_sweeps >= 1,
                "max_sweeps must be >= 1")
        require(self.log_every >= 0, "log_every must be >= 0")
        if n_classes is not None and self.mode == "discriminative" and self.n_atoms < n_classes:
            warnings.warn(f"n_atoms={self.n_atoms} is smaller than the {n_classes} classes",
                          stacklevel=3)
        return self

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ModelState:
    augmented: AugmentedDictionary
    acc: Accumulators
    config: TrainerConfig
    iteration: int = 0
    last_residuals: np.ndarray = field(default=None, repr=False)

    @property
    def D(self):
        return self.augmented.top.copy()

    @property
    def W(self):
        return split(self.augmented)[1]

    def to_model(self, class_names=None):
        cfg = self.config
        meta = {"seed": cfg.seed, "config_digest": cfg.digest(), "mode": cfg.mode,
                "samples_seen": self.acc.samples_seen}
        D, W = split(self.augmented)
        return Model(D, W, self.augmented.lambda0, cfg.sparsity, list(class_names or []), meta)


def _rngs(seed):
    init_seq, order_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(order_seq)


def _unit_columns(D):
    norms = np.linalg.norm(D, axis=0)
    norms[norms == 0] = 1.0
    return D / norms


def init_dictionary(data, n_atoms, mode="random-sample", seed=0, config=None):
    """Initial atoms drawn from the non-degenerate training signals.

    ``mode="reconstructive-warmstart"`` refines the random draw with one
    reconstructive epoch (label block absent) before returning.
    """
    if len(data) == 0:
        raise InvalidInputError("cannot initialize a dictionary from an empty dataset")
    if mode not in INIT_MODES:
        raise ConfigError(f"init_mode must be one of {INIT_MODES}, got {mode!r}")
    pool = np.flatnonzero(~data.degenerate)
    if n_atoms > pool.size:
        raise InvalidInputError(
            f"{n_atoms} atoms requested but only {pool.size} usable training signals"
        )
    rng, order_rng = _rngs(seed)
    picks = rng.choice(pool, size=n_atoms, replace=False)
    D = _unit_columns(data.X[picks].T)
    if mode == "random-sample":
        return D
    base = config if config is not None else TrainerConfig(n_atoms=n_atoms)
    warm_cfg = TrainerConfig(**{**asdict(base), "mode": "reconstructive", "n_atoms": n_atoms,
                                "n_epochs": 1, "max_samples": None, "seed": seed,
                                "log_every": 0})
    state = ModelState(augment(D, np.zeros((0, n_atoms)), 1.0),
                       Accumulators.zeros(n_atoms, data.n_features), warm_cfg)
    _run(state, data, len(data), order_rng)
    return _unit_columns(state.augmented.top)


def init_classifier(D, data, sparsity, lambda1):
    """Ridge classifier on the sparse codes of ``data`` over ``D``.

    Solves ``min_W ||Y - W A||_F^2 + lambda1 ||W||_F^2`` in closed form,
    ``W = Y A^T (A A^T + lambda1 I)^-1``.
    """
    if not lambda1 > 0:
        raise ConfigError(f"lambda1 must be positive, got {lambda1!r}")
    A = batch_omp(data.X.T, D, sparsity)
    Y = one_hot(data.labels, data.n_classes)
    return ridge_classifier(A, Y, lambda1)


def ridge_classifier(A, Y, lambda1):
    k = A.shape[0]
    gram = A @ A.T + lambda1 * np.eye(k)
    return solve(gram, A @ Y.T, assume_a="pos").T


def _renormalize(Dt):
    scale = np.linalg.norm(Dt.top, axis=0)
    scale[scale == 0] = 1.0
    Dt.columns /= scale


def minibatch_step(state, X, labels=None):
    """One online iteration on the signals in the rows of ``X``.

    All codes are computed on the dictionary as it was before the batch,
    accumulated one after another, then a single block-coordinate update
    runs.  ``labels`` are ignored in reconstructive mode.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Dt, cfg = state.augmented, state.config
    if X.shape[1] != Dt.n_features:
        raise InvalidInputError(
            f"batch has {X.shape[1]} features, dictionary has {Dt.n_features} rows"
        )
    D = Dt.top
    if X.shape[0] == 1:
        codes = omp(X[0], D, cfg.sparsity, cfg.residual_tol)[:, None]
    else:
        codes = batch_omp(X.T, D, cfg.sparsity, cfg.residual_tol)
    state.last_residuals = np.linalg.norm(X.T - D @ codes, axis=0)

    if Dt.n_classes:
        if labels is None:
            raise InvalidInputError("discriminative training needs labels")
        Y = np.sqrt(Dt.lambda0) * one_hot(labels, Dt.n_classes)
        Xt = np.vstack([X.T, Y])
    else:
        Xt = X.T
    for i in range(X.shape[0]):
        accumulate(state.acc, Xt[:, i], codes[:, i])

    bcd_update(Dt, state.acc, tol=cfg.tol, max_sweeps=cfg.max_sweeps, normalize=True,
               usage_eps=cfg.usage_eps, normalize_inside=cfg.normalize_inside)
    _renormalize(Dt)
    state.iteration += 1
    return state


def _replace_dead_atoms(state, data, recent):
    """Swap never-used atoms for the worst-reconstructed recent signals."""
    Dt = state.augmented
    dead = np.flatnonzero(np.diag(state.acc.M) <= state.config.usage_eps)
    if dead.size == 0 or not recent:
        return 0
    seen, ranked = set(), []
    for idx, res in sorted(recent, key=lambda r: (-r[1], r[0])):
        if idx not in seen and not data.degenerate[idx]:
            seen.add(idx)
            ranked.append(idx)
    for j, idx in zip(dead, ranked):
        x = data.X[idx]
        scale = np.linalg.norm(x)
        Dt.columns[: Dt.n_features, j] = x / scale
        if Dt.n_classes:
            y = one_hot(data.labels[idx], Dt.n_classes)[:, 0]
            Dt.columns[Dt.n_features :, j] = np.sqrt(Dt.lambda0) * y / scale
    return min(dead.size, len(ranked))


def _run(state, data, budget, order_rng, progress=None):
    cfg = state.config
    m = len(data)
    kappa = int(cfg.batch_size)
    recent = deque(maxlen=max(4 * state.augmented.n_atoms, 256))
    labels = None if cfg.mode == "reconstructive" else data.labels
    consumed = 0
    start = time.perf_counter()
    while consumed < budget:
        order = order_rng.permutation(m)
        finished_epoch = True
        for pos in range(0, m, kappa):
            if consumed >= budget:
                finished_epoch = False
                break
            idx = order[pos : pos + min(kappa, budget - consumed)]
            minibatch_step(state, data.X[idx], None if labels is None else labels[idx])
            recent.extend(zip(idx.tolist(), state.last_residuals.tolist()))
            consumed += idx.size
            if progress is not None and cfg.log_every and state.iteration % cfg.log_every == 0:
                progress(_record(state, start))
        if finished_epoch and cfg.replace_dead_atoms:
            _replace_dead_atoms(state, data, recent)
    if progress is not None and cfg.log_every:
        progress(_record(state, start))
    return state


def _record(state, start):
    return {
        "iteration": state.iteration,
        "samples_seen": state.acc.samples_seen,
        "surrogate_objective": surrogate_objective(state.augmented, state.acc),
        "elapsed_s": round(time.perf_counter() - start, 6),
    }


def train(data, config, progress=None):
    """Run the online algorithm on a :class:`~oddl.datasets.Dataset`.

    ``progress``, if given, receives a dict (iteration, samples seen,
    surrogate objective, elapsed seconds) every ``config.log_every``
    iterations and once at the end.
    """
    config.validate(data.n_classes)
    if len(data) == 0:
        raise InvalidInputError("training set is empty")
    init_rng_seed, order_rng = np.random.SeedSequence(config.seed).spawn(2)
    init_seed = int(init_rng_seed.generate_state(1)[0])
    k = config.n_atoms
    D = init_dictionary(data, k, config.init_mode, init_seed, config)
    if config.mode == "discriminative":
        W = init_classifier(D, data, config.sparsity, config.lambda1)
        lambda0 = config.lambda0
    else:
        W = np.zeros((0, k))
        lambda0 = config.lambda0 if config.lambda0 > 0 else 1.0
    Dt = augment(D, W, lambda0)
    state = ModelState(Dt, Accumulators.zeros(k, Dt.columns.shape[0]), config)
    budget = config.max_samples if config.max_samples is not None else config.n_epochs * len(data)
    return _run(state, data, budget, np.random.default_rng(order_rng), progress)
