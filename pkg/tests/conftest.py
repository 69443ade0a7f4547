import numpy as np
import pytest

from replasso import Partition, ProblemInstance


def random_instance(rng, n=40, p=20, k=4, sigma=0.3, rho=0.0, group_size=2):
    """Unit-norm design with optional within-group correlation and a k-sparse truth."""
    part = Partition.contiguous(p, group_size)
    X = np.empty((n, p))
    for members in part.groups:
        f = rng.standard_normal(n)
        X[:, list(members)] = np.sqrt(rho) * f[:, None] + np.sqrt(1 - rho) * rng.standard_normal((n, len(members)))
    X /= np.linalg.norm(X, axis=0)
    beta = np.zeros(p)
    idx = rng.choice(p, size=k, replace=False)
    beta[idx] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 2.0, size=k)
    y = X @ beta + sigma * rng.standard_normal(n)
    return ProblemInstance(X, y, beta, sigma), part


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def identity2():
    return ProblemInstance(np.eye(2), np.array([3.0, 1.0]))


_ACCEPTANCE = []


def record_criterion(number, name, ok, detail):
    """Log one acceptance criterion; the lines are repeated in the terminal summary."""
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
    _ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
