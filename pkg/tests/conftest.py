import numpy as np
import pytest


def random_spd(rng, d, diag_boost=None):
    """A well-conditioned random symmetric positive-definite matrix."""
    A = rng.standard_normal((d, d))
    return A @ A.T + (diag_boost or d) * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
