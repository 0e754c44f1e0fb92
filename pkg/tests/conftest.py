import numpy as np
import pytest

from flowgate.parallel import pin_blas_single

pin_blas_single()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
