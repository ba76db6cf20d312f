import numpy as np
import pytest

from minpower_net.graph import NodeRecord
from minpower_net.power import PowerModel


def random_nodes(seed, count=20, size=1000.0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, size, size=(count, 2))
    return [NodeRecord(i, (float(x), float(y))) for i, (x, y) in enumerate(xy)]


def instance_model(seed, rng_range=400.0):
    """Cycle through n in {2, 4} and c in {0, 0.1 t range^n}."""
    n = (2.0, 4.0)[seed % 2]
    c = (0.0, 0.1 * rng_range**n)[(seed // 2) % 2]
    return PowerModel.from_range(rng_range, n=n, c=c)


def line(*xs):
    return [NodeRecord(i, (float(x), 0.0)) for i, x in enumerate(xs)]


@pytest.fixture
def collinear():
    """Three nodes at unit spacing, t=1, n=2, c=0."""
    return line(0, 1, 2), PowerModel(t=1.0, n=2.0, c=0.0, p_max=16.0)


@pytest.fixture
def e2_ne_emin():
    """Direct edge u->v survives 2-hop relays but loses to the 3-hop detour."""
    nodes = [
        NodeRecord(0, (0.0, 0.0)),
        NodeRecord(1, (4.0, 0.0)),
        NodeRecord(2, (1.0, 2.0)),
        NodeRecord(3, (3.0, 2.0)),
    ]
    return nodes, PowerModel(t=1.0, n=2.0, c=0.5, p_max=100.0)
