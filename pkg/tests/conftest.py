import sys

import numpy as np
import pytest

from robust_kalman.linear_gaussian import GaussianBelief, StateSpaceModel


def random_spd(rng, n, cond_max=1e2):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.exp(rng.uniform(0.0, np.log(cond_max), size=n))
    a = (q * eig) @ q.T
    return 0.5 * (a + a.T)


def random_instance(rng, n=None, m=None):
    """Well-conditioned model, prior belief and measurement."""
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, n + 1))
    f = rng.standard_normal((n, n)) * 0.5 + np.eye(n)
    h = rng.standard_normal((m, n))
    while np.linalg.cond(h @ h.T) > 1e3:
        h = rng.standard_normal((m, n))
    model = StateSpaceModel(f, h, random_spd(rng, n), random_spd(rng, m))
    prior = GaussianBelief(rng.standard_normal(n) * 3, random_spd(rng, n))
    z = rng.standard_normal(m) * 3
    return model, prior, z


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scalar_model():
    return StateSpaceModel(np.eye(1), np.eye(1), np.eye(1), np.eye(1))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
