import numpy as np
import pytest

from hjmsva.curve import DiscountCurve
from hjmsva.svapprox import ForwardVolSurface


@pytest.fixture
def flat2():
    return DiscountCurve.flat(0.02, 30.0)


@pytest.fixture
def unit_curve():
    return DiscountCurve(np.array([30.0]), np.array([1.0]))


@pytest.fixture
def flat_surface():
    return ForwardVolSurface.flat(0.008, 80)


def random_correlation(rng, n):
    a = rng.normal(size=(n, n + 2))
    c = a @ a.T
    d = np.sqrt(np.diag(c))
    rho = c / np.outer(d, d)
    np.fill_diagonal(rho, 1.0)
    return rho
