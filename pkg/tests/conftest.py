import numpy as np
import pytest

from chebymg import discretization as disc
from chebymg.multigrid import Hierarchy


def make_hierarchy(n=8, Lx=1.0, factor=2):
    return Hierarchy.for_domain(disc.Domain(Lx, 1.0, n), factor)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


@pytest.fixture
def small_hierarchy():
    return make_hierarchy(8)
