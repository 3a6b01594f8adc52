import math

import numpy as np
import pytest

from accsinkhorn.otcore import TransportProblem


@pytest.fixture
def e2():
    """Two-point instance used by many hand-derived checks."""
    return TransportProblem(np.array([0.7, 0.3]), np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def uniform2():
    return TransportProblem(np.full(2, 0.5), np.full(2, 0.5), np.zeros((2, 2)))


def e2_row_potentials():
    # independent closed form: each row of exp(-C) sums to 1 + e^-1
    z = math.log(1.0 + math.exp(-1.0))
    return np.array([math.log(0.7) - z, math.log(0.3) - z])


def random_problem(rng, n, m, eps=1.0, scale=1.0):
    a = rng.uniform(0.1, 1.0, n)
    b = rng.uniform(0.1, 1.0, m)
    C = rng.uniform(0.0, scale, (n, m))
    return TransportProblem(a / a.sum(), b / b.sum(), C, eps)
