import numpy as np
import pytest

from gmclab.harness import rng_for_seed, seed_for_replica


@pytest.fixture
def rng():
    """Fresh deterministic generator per test."""
    return rng_for_seed(seed_for_replica(0xC0FFEE, 0))


def replica_rngs(master, count):
    """Independent per-replica generators, harness-style."""
    return (rng_for_seed(seed_for_replica(master, i)) for i in range(count))
