import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedcross.data import make_synthetic, partition_dirichlet, partition_iid, train_test_split  # noqa: E402
from fedcross.models import MlpArchitecture  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_problem():
    """4-class, 6-dim blobs split over 8 clients; fast enough for many short runs."""
    ds = make_synthetic(4, 6, 60, 3.0, seed=5)
    train, test = train_test_split(ds, 0.2, seed=5)
    plan = partition_dirichlet(train, 8, beta=0.5, min_per_client=5, seed=5)
    arch = MlpArchitecture((6, 8, 4))
    return train, test, plan, arch


@pytest.fixture(scope="session")
def iid_problem():
    ds = make_synthetic(3, 4, 40, 4.0, seed=2)
    train, test = train_test_split(ds, 0.2, seed=2)
    plan = partition_iid(train, 6, seed=2)
    return train, test, plan, MlpArchitecture((4, 3))


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Callable that records one PASS/FAIL line per acceptance criterion."""

    def record(number, title, ok, detail):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
