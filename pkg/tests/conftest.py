import math

import numpy as np
import pytest
from scipy.linalg import expm

from hamstab.propagator import CoefficientPath
from hamstab.symplectic import standard_j
from hamstab.systems import angle_boundary, dirichlet_boundary

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(line)


def random_symmetric(rng, m, scale=1.0):
    A = rng.normal(size=(m, m)) * scale
    return (A + A.T) / 2


def random_symplectic(rng, n, scale=0.5):
    return expm(standard_j(n) @ random_symmetric(rng, 2 * n, scale))


def random_positive(rng, m, lo=0.2, hi=1.5):
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    return Q @ np.diag(rng.uniform(lo, hi, m)) @ Q.T


def smooth_path(rng, n, T=1.0, scale=0.5):
    """``C0 + cos(2 pi t / T) C1 + (t / T) C2`` with random symmetric ``C_k``."""
    C0, C1, C2 = (random_symmetric(rng, 2 * n, scale) for _ in range(3))
    return CoefficientPath(n, T, lambda t: C0 + math.cos(2 * math.pi * t / T) * C1 + (t / T) * C2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def dirichlet1():
    return dirichlet_boundary(1)


@pytest.fixture
def counterexample():
    T = 1.0
    return (CoefficientPath.zero(1, T), CoefficientPath.constant(np.array([[0.0, 1.0], [1.0, 0.0]]), T),
            dirichlet_boundary(1))


@pytest.fixture
def unit_weight():
    T = 1.0
    return CoefficientPath.zero(1, T), CoefficientPath.constant(np.eye(2), T), dirichlet_boundary(1)


__all__ = ["random_symmetric", "random_symplectic", "random_positive", "smooth_path", "angle_boundary"]
