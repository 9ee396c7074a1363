import numpy as np
import pytest

from isingflow import IsingProblem
from isingflow.closed_form import r2_problem


@pytest.fixture
def s2():
    return r2_problem()


@pytest.fixture
def s3():
    return IsingProblem(np.array([[0, 1, -2], [1, 0, 3], [-2, 3, 0]], dtype=float), name="S3")


@pytest.fixture
def zero3():
    return IsingProblem(np.zeros((3, 3)))


def random_pm1(n, seed):
    rng = np.random.default_rng(seed)
    S = np.triu(rng.choice([-1.0, 1.0], size=(n, n)), 1)
    return IsingProblem(S + S.T)
