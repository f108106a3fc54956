import numpy as np
import pytest

from cmcb.model import Instance

# One line per acceptance criterion, echoed after the run so the verdicts
# survive pytest's output capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


REF_THETA = np.array([0.2, 0.3, 0.2, 0.2, 0.2])
REF_SIGMA = 1.05 * np.eye(5) - 0.05


@pytest.fixture
def ref_fi():
    """The d=5 synthetic instance under full information, rho = 0.1."""
    return Instance(REF_THETA, REF_SIGMA, 0.1, None)


@pytest.fixture
def ref_sb():
    """Same instance on the restricted simplex with c = 0.2."""
    return Instance(REF_THETA, REF_SIGMA, 0.1, 0.2)


@pytest.fixture
def ref_fb():
    """Same instance with the high risk weight used under bandit feedback."""
    return Instance(REF_THETA, REF_SIGMA, 10.0, None)


def finite_diff_grad(fn, w, eps=1e-6):
    """Central-difference gradient of a scalar function at w."""
    w = np.asarray(w, float)
    out = np.empty_like(w)
    for i in range(w.size):
        hi = w.copy()
        lo = w.copy()
        hi[i] += eps
        lo[i] -= eps
        out[i] = (fn(hi) - fn(lo)) / (2.0 * eps)
    return out


def random_pd_instance(rng, d=3, rho=1.0, c=None):
    """Instance with uniform means and a random well-scaled PD covariance."""
    theta = rng.uniform(0.0, 1.0, d)
    a = rng.normal(size=(d, d))
    sigma = a @ a.T / d
    sigma /= max(1.0, np.diag(sigma).max())
    return Instance(theta, sigma, rho, c)
