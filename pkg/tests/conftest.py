import os

import numpy as np
import pytest
from hypothesis import settings

from eunn.perf import tune_allocator

tune_allocator()
settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
