import numpy as np
import pytest

from vglab.autodiff import set_default_dtype


@pytest.fixture(autouse=True)
def _float64_tape():
    """Unit tests run the tape at 64-bit; training code paths opt back into 32."""
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
