import numpy as np
import pytest

from dcone_lab import BoundaryCondition, BoundaryProfile, FieldState, build_trace

DEFAULT_P = 2.5


@pytest.fixture(scope="session")
def paper_profile():
    return BoundaryProfile.preset("paper-default")


@pytest.fixture(scope="session")
def paper_trace(paper_profile):
    return build_trace(paper_profile)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def admissible_random_profile(rng, K=4):
    """Random profile with harmonics 2..K; a_0 is solved for so condition 1 holds exactly."""
    a = np.zeros(K + 1)
    b = np.zeros(K)
    a[2:] = rng.normal(size=K - 1) / np.arange(2, K + 1)
    b[1:] = rng.normal(size=K - 1) / np.arange(2, K + 1)
    k = np.arange(K + 1)
    neg = np.sum((k[2:] ** 2 - 1) * (a[2:] ** 2 + b[1:] ** 2))
    a[0] = np.sqrt(neg / 2.0)
    return BoundaryProfile(tuple(a), tuple(b))


def polynomial_state(grid, fn):
    """State and pins both sampled from ``fn(x, y) -> (u1, u2, v)``."""
    bc = BoundaryCondition.from_function(grid, fn)
    return FieldState.from_function(grid, bc, fn)


def manufactured(x, y):
    """Smooth non-polynomial fields for convergence studies."""
    return (
        0.1 * np.sin(x + 2 * y),
        0.1 * np.cos(x * y) + 0.05 * x * x,
        0.3 * np.sin(1.3 * x + 0.4) * np.cos(0.7 * y) + 0.2 * x * y,
    )
