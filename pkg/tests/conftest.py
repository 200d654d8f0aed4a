import numpy as np
import pytest

from promptseg import numerics as N


@pytest.fixture(autouse=True)
def _fast32_default():
    """Every test starts from the fast32 default mode."""
    N.set_precision("fast32")
    yield
    N.set_precision("fast32")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
