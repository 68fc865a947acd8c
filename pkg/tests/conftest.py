import numpy as np
import pytest

from survkit.data import SurvivalDataset


def make_dataset(times, status, X=None, names=None):
    return SurvivalDataset.from_arrays(times, status, X, names)


def random_survival(rng, n, p, max_time=20, event_rate=0.7, ties=True):
    """Small random cohort; times drawn with replacement when ``ties``."""
    if ties:
        times = rng.integers(1, max_time + 1, size=n)
    else:
        times = rng.choice(np.arange(1, max_time + 1), size=n, replace=False)
    status = (rng.uniform(size=n) < event_rate).astype(int)
    if status.sum() == 0:
        status[0] = 1
    X = rng.standard_normal((n, p))
    return make_dataset(times, status, X)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
