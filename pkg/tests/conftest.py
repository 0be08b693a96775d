import numpy as np
import pytest

from sparsebound.model import SparseLinearModel, SparseVector


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ssnm3():
    return SparseLinearModel.ssnm(3, 1, 1.0)


@pytest.fixture
def ssnm5():
    return SparseLinearModel.ssnm(5, 1, 1.0)


@pytest.fixture
def x0_ssnm3():
    return SparseVector([2.0, 0.0, 0.0])


@pytest.fixture
def general_model():
    return SparseLinearModel.gaussian(3, 5, 1, 1.0, seed=11)


@pytest.fixture
def random_sparse(rng):
    """Draw a random vector with at most S nonzeros"""
    def draw(N, S, scale=3.0):
        x = np.zeros(N)
        support = rng.choice(N, size=S, replace=False)
        x[support] = scale * rng.standard_normal(S)
        return x
    return draw
