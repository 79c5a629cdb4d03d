import pytest
from hypothesis import HealthCheck, settings

import helpers
from grnnctl.graphs import topology_from_positions

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def line4():
    """Four nodes on a line at 0.10, 0.20, 0.35, 0.90, each linked to its
    single nearest neighbour and symmetrized. Small enough to check every
    derived quantity by hand."""
    return topology_from_positions([0.10, 0.20, 0.35, 0.90], k=1)


@pytest.fixture
def tiny_prob():
    return helpers.tiny_problem(seed=3)
