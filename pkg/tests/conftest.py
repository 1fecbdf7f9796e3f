import itertools

import numpy as np
import pytest

from oddl.datasets import Dataset, make_synthetic
from oddl.preprocessing import normalize

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion id")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    number = getattr(report, "criterion", None)
    if number is not None:
        _ACCEPTANCE[number] = (report.outcome, getattr(report, "criterion_title", ""),
                               getattr(report, "criterion_note", ""))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]
        report.criterion_title = marker.args[1]
        report.criterion_note = getattr(item, "criterion_note", "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for number in sorted(_ACCEPTANCE):
        outcome, title, note = _ACCEPTANCE[number]
        line = f"criterion {number:>2}: {labels.get(outcome, outcome):4s}  {title}"
        if note:
            line += f"  [{note}]"
        terminalreporter.write_line(line)


def unit_dictionary(rng, n, k):
    D = rng.standard_normal((n, k))
    return D / np.linalg.norm(D, axis=0)


def exhaustive_best_residual(x, D, max_atoms):
    """Smallest least-squares residual over every support of size <= max_atoms."""
    best = np.linalg.norm(x)
    for size in range(1, max_atoms + 1):
        for S in itertools.combinations(range(D.shape[1]), size):
            sub = D[:, S]
            coef = np.linalg.lstsq(sub, x, rcond=None)[0]
            best = min(best, np.linalg.norm(x - sub @ coef))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def synthetic_split():
    train_X, train_y, test_X, test_y, truth = make_synthetic(seed=0)
    train = Dataset(normalize(train_X)[0], train_y, 3)
    test = Dataset(normalize(test_X)[0], test_y, 3)
    return train, test, truth
