import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)


def random_state(rng, strong=False):
    """A physically valid random primitive state."""
    hi = 50.0 if strong else 3.0
    return (float(rng.uniform(-hi, hi)), float(rng.uniform(-hi, hi)),
            float(rng.uniform(0.05, 8.0)), float(rng.uniform(0.05, 100.0)))
