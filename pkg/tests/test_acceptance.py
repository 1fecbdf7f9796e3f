"""Acceptance suite: one test per criterion, summarized at the end of the run.

Criteria 7, 8 and 10 need user-supplied data.  Point ``ODDL_USPS_MANIFEST``
or ``ODDL_MNIST_MANIFEST`` at a dataset manifest to enable them.
"""

import itertools
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from oddl.datasets import Dataset, load_manifest, load_split, make_synthetic
from oddl.inference import Model, evaluate
from oddl.preprocessing import normalize, one_hot
from oddl.sparse import batch_omp, omp
from oddl.trainer import TrainerConfig, init_classifier, train
from oddl.update import Accumulators, accumulate, augment, bcd_sweep, bcd_update, surrogate_objective

from conftest import unit_dictionary

pytestmark = pytest.mark.acceptance
TESTS = Path(__file__).parent


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def best_residual(x, D, max_atoms):
    """Exhaustive search over supports, batched through stacked pseudo-inverses."""
    best = np.linalg.norm(x)
    for size in range(1, max_atoms + 1):
        supports = np.array(list(itertools.combinations(range(D.shape[1]), size)))
        subs = D[:, supports].transpose(1, 0, 2)
        coef = np.linalg.pinv(subs) @ x
        res = np.linalg.norm(x - np.einsum("cns,cs->cn", subs, coef), axis=1)
        best = min(best, res.min())
    return best


def incoherent_dictionary(rng, n, k, mu=0.5):
    """Unit atoms added one at a time, each with |inner product| < mu to the rest."""
    while True:
        atoms = []
        for _ in range(20000):
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            if all(abs(v @ a) < mu for a in atoms):
                atoms.append(v)
                if len(atoms) == k:
                    return np.array(atoms).T


@criterion(1, "OMP vs exhaustive-support oracle")
def test_omp_oracle(request):
    start = time.perf_counter()
    low_total = low_hit = 0
    for i, child in enumerate(np.random.SeedSequence(99).spawn(200)):
        rng = np.random.default_rng(child)
        n, L = int(rng.integers(4, 9)), int(rng.integers(1, 4))
        if i % 2:
            k = int(rng.integers(n, min(10, 2 * n) + 1))
            D = incoherent_dictionary(rng, n, k)
        else:
            k = int(rng.integers(n, 11))
            D = unit_dictionary(rng, n, k)
        coherence = np.max(np.abs(D.T @ D - np.eye(k)))
        S = rng.choice(k, L, replace=False)
        coef = rng.uniform(0.5, 1.5, L) * rng.choice([-1, 1], L)
        x = D[:, S] @ coef + 0.01 * rng.standard_normal(n) / np.sqrt(n)
        greedy = np.linalg.norm(x - D @ omp(x, D, L))
        optimum = best_residual(x, D, L)
        assert greedy >= optimum - 1e-9
        if coherence < 0.5:
            low_total += 1
            low_hit += greedy <= optimum + 1e-9
    elapsed = time.perf_counter() - start
    request.node.criterion_note = f"optimum on {low_hit}/{low_total} low-coherence, {elapsed:.1f}s"
    assert low_hit >= 0.9 * low_total
    assert elapsed < 10


@criterion(2, "batch OMP matches per-signal OMP")
def test_batch_equivalence(request):
    rng = np.random.default_rng(2)
    D = unit_dictionary(rng, 64, 128)
    X = rng.standard_normal((64, 1000))
    start = time.perf_counter()
    batch = batch_omp(X, D, 10)
    single = np.column_stack([omp(X[:, i], D, 10) for i in range(1000)])
    elapsed = time.perf_counter() - start
    gap = np.max(np.abs(batch - single))
    request.node.criterion_note = f"max gap {gap:.1e}, {elapsed:.1f}s"
    assert gap <= 1e-8
    assert elapsed < 10


@criterion(3, "BCD converges to N M^-1 with monotone surrogate")
def test_bcd_convergence(request):
    start = time.perf_counter()
    worst_gap, worst_rise = 0.0, -np.inf
    for child in np.random.SeedSequence(3).spawn(50):
        rng = np.random.default_rng(child)
        k = int(rng.integers(2, 17))
        rows = int(rng.integers(k, 2 * k + 4))
        B = rng.standard_normal((k, k))
        M = B @ B.T / k + 0.5 * np.eye(k)
        N = rng.standard_normal((rows, k))
        Dt = augment(rng.standard_normal((rows - 1, k)), rng.standard_normal((1, k)), 1.0)
        acc = Accumulators(M, N, 1)
        values = [surrogate_objective(Dt, acc)]
        result = bcd_update(Dt, acc, tol=1e-13, max_sweeps=20000, normalize=False,
                            callback=lambda s, d: values.append(surrogate_objective(d, acc)))
        assert result.converged
        worst_gap = max(worst_gap, np.linalg.norm(Dt.columns - N @ np.linalg.inv(M)))
        worst_rise = max(worst_rise, np.max(np.diff(values)))
    elapsed = time.perf_counter() - start
    request.node.criterion_note = (f"max Frobenius gap {worst_gap:.1e}, "
                                   f"max per-sweep rise {worst_rise:.1e}, {elapsed:.1f}s")
    assert worst_gap <= 1e-6
    assert worst_rise <= 1e-10
    assert elapsed < 30


@criterion(4, "single-sample column update is exact")
def test_single_sample_exactness(request):
    worst = 0.0
    for child in np.random.SeedSequence(4).spawn(20):
        rng = np.random.default_rng(child)
        n, q, k = int(rng.integers(3, 30)), int(rng.integers(1, 6)), int(rng.integers(1, 20))
        lam = float(rng.uniform(0.1, 5))
        Dt = augment(unit_dictionary(rng, n, k), rng.standard_normal((q, k)), lam)
        j = int(rng.integers(k))
        xt = np.concatenate([rng.standard_normal(n), np.sqrt(lam) * one_hot(rng.integers(q), q)[:, 0]])
        acc = Accumulators.zeros(k, n + q)
        code = np.zeros(k)
        code[j] = 1.0
        accumulate(acc, xt, code)
        bcd_sweep(Dt, acc, normalize=False)
        worst = max(worst, np.max(np.abs(Dt.columns[:, j] - xt)))
    request.node.criterion_note = f"max deviation {worst:.1e}"
    assert worst <= 1e-12


@criterion(5, "ridge classifier init is stationary")
def test_ridge_stationarity(request):
    worst = 0.0
    for child in np.random.SeedSequence(5).spawn(20):
        rng = np.random.default_rng(child)
        n, k, q, m = int(rng.integers(5, 15)), int(rng.integers(4, 20)), int(rng.integers(2, 5)), 60
        L = int(rng.integers(1, min(n, k, 5) + 1))
        lam = float(10 ** rng.uniform(-3, 0))
        data = Dataset(normalize(rng.standard_normal((m, n)))[0], rng.integers(0, q, m), q)
        D = unit_dictionary(rng, n, k)
        W = init_classifier(D, data, L, lam)
        A = batch_omp(data.X.T, D, L)
        Y = one_hot(data.labels, q)

        def objective(V):
            return np.sum((Y - V @ A) ** 2) + lam * np.sum(V**2)

        grad = np.zeros_like(W)
        h = 1e-4
        for idx in np.ndindex(W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            grad[idx] = (objective(W + E) - objective(W - E)) / (2 * h)
        worst = max(worst, np.linalg.norm(grad))
    request.node.criterion_note = f"max finite-difference gradient norm {worst:.1e}"
    assert worst <= 1e-8


def synthetic_accuracies(train_set, test_set, seed):
    cfg = TrainerConfig(n_atoms=24, sparsity=3, lambda0=1.0, n_epochs=1, seed=seed)
    oddl = train(train_set, cfg).to_model()
    # plain online reconstructive learning from sampled atoms, then a ridge fit;
    # a warm-started baseline would reproduce ODDL's dictionary exactly
    base_cfg = TrainerConfig(**{**cfg.__dict__, "mode": "reconstructive",
                                "init_mode": "random-sample"})
    base_state = train(train_set, base_cfg)
    W = init_classifier(base_state.D, train_set, cfg.sparsity, cfg.lambda1)
    base = Model(base_state.D, W, 1.0, cfg.sparsity)
    acc = [1 - evaluate(m, test_set.X, test_set.labels).error_rate for m in (oddl, base)]
    return acc[0], acc[1]


def _split(seed):
    train_X, train_y, test_X, test_y, _ = make_synthetic(seed=seed)
    return (Dataset(normalize(train_X)[0], train_y, 3), Dataset(normalize(test_X)[0], test_y, 3))


@criterion(6, "synthetic fixture: ODDL >= 95% and beats the reconstructive baseline")
def test_synthetic_end_to_end(request, synthetic_split):
    train_set, test_set, _ = synthetic_split
    start = time.perf_counter()
    oddl, base = synthetic_accuracies(train_set, test_set, seed=0)
    elapsed = time.perf_counter() - start
    # not gated: the same comparison on other fixture seeds
    others = [synthetic_accuracies(*_split(s), seed=s) for s in range(1, 10)]
    wins = sum(a > b for a, b in others)
    request.node.criterion_note = (
        f"ODDL {oddl:.4f} vs baseline {base:.4f}, {elapsed:.1f}s; seeds 1-9: ODDL ahead "
        f"{wins}/9, mean {np.mean([a for a, _ in others]):.4f} vs {np.mean([b for _, b in others]):.4f}"
    )
    assert oddl >= 0.95
    assert oddl > base
    assert elapsed < 60


def _manifest(var):
    path = os.environ.get(var)
    if not path:
        pytest.skip(f"set {var} to a dataset manifest to run this criterion")
    return load_manifest(path)


@criterion(7, "USPS k=320 L=5 one epoch: test error <= 9%")
def test_usps_desk_scale(request):
    manifest = _manifest("ODDL_USPS_MANIFEST")
    train_set, test_set = load_split(manifest, "train"), load_split(manifest, "test")
    start = time.perf_counter()
    cfg = TrainerConfig(n_atoms=320, sparsity=5, lambda0=1.0, n_epochs=1)
    report = evaluate(train(train_set, cfg).to_model(), test_set.X, test_set.labels)
    elapsed = time.perf_counter() - start
    request.node.criterion_note = f"error {report.error_rate:.4f}, {elapsed:.0f}s"
    assert report.error_rate <= 0.09
    assert elapsed < 600


@criterion(8, "USPS: error(k=160) > error(k=640)")
def test_usps_size_trend(request):
    manifest = _manifest("ODDL_USPS_MANIFEST")
    train_set, test_set = load_split(manifest, "train"), load_split(manifest, "test")
    errors = {}
    for k in (160, 640):
        cfg = TrainerConfig(n_atoms=k, sparsity=5, lambda0=1.0, n_epochs=1)
        errors[k] = evaluate(train(train_set, cfg).to_model(), test_set.X, test_set.labels).error_rate
    request.node.criterion_note = f"error(160) {errors[160]:.4f}, error(640) {errors[640]:.4f}"
    assert errors[160] > errors[640]


@criterion(9, "invariant property suite")
def test_invariant_suite(request):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         str(TESTS / "test_properties.py")],
        capture_output=True, text=True, cwd=TESTS.parent,
    )
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    request.node.criterion_note = f"{summary.strip('= ')}"
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert elapsed < 60


@criterion(10, "MNIST k=960 L=5 one epoch (reported only)")
def test_mnist_full_scale(request):
    manifest = _manifest("ODDL_MNIST_MANIFEST")
    train_set, test_set = load_split(manifest, "train"), load_split(manifest, "test")
    cfg = TrainerConfig(n_atoms=960, sparsity=5, lambda0=1.0, n_epochs=1, batch_size=16)
    report = evaluate(train(train_set, cfg).to_model(), test_set.X, test_set.labels)
    request.node.criterion_note = f"error {report.error_rate:.4f} (reference only)"
    assert 0.0 <= report.error_rate <= 1.0
