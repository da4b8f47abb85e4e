import pytest

from diffhist.core import make_uniform_bins
from diffhist.sampling import Distribution, synth


@pytest.fixture(scope="session")
def grid20():
    return make_uniform_bins(-1.0, 1.0, 20)


@pytest.fixture(scope="session")
def normal_10k():
    return synth(Distribution("normal"), 10_000, seed=42)
