import math

import numpy as np
import pytest

from mqubit import build_params


def circ_dist(a, b):
    """Shortest angular distance, elementwise."""
    return np.abs((np.asarray(a) - np.asarray(b) + math.pi) % (2 * math.pi) - math.pi)


@pytest.fixture
def generic_params():
    """A generic point, well away from all special curves."""
    return build_params(2.92, 3.0, 1.0)


@pytest.fixture
def frozen_params():
    """YT = 2*pi exactly: M=2, gamma=1 gives Y = sqrt(8)."""
    return build_params(2.0, 2.0 * math.pi / math.sqrt(8.0), 1.0)


@pytest.fixture
def period2_params():
    """YT = pi: M=1, gamma=1 gives Y = sqrt(5)."""
    return build_params(1.0, math.pi / math.sqrt(5.0), 1.0)


@pytest.fixture
def shift_params():
    """MT = pi."""
    return build_params(1.0, math.pi, 1.0)


def random_param_sets(n, seed=0, gamma_range=(0.2, 2.0)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(
            build_params(
                float(rng.uniform(0.05, 5.0)),
                float(rng.uniform(0.05, 5.0)),
                float(rng.uniform(*gamma_range)),
            )
        )
    return out
