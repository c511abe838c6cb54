import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# One deterministic profile for the whole suite: derandomized example
# generation so CI and local runs see the exact same cases.
settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
