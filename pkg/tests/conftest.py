import numpy as np
import pytest

from discrete_recovery.numerics import Rng


@pytest.fixture
def rng():
    return Rng(12345)


def assert_labels_equal(a, b):
    np.testing.assert_array_equal(np.asarray(a), np.asarray(b))
