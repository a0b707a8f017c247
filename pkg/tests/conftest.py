import numpy as np
import pytest

from equivar import Design, ParameterPoint


@pytest.fixture
def design31() -> Design:
    """p=2, n=4 design with single-sample rows: reps (1, 3)."""
    return Design(xp=[[1.0, 0.0], [1.0, 1.0]], reps=(1, 3))


@pytest.fixture
def design33() -> Design:
    """p=2, n=6 design with every population observed three times."""
    return Design(xp=[[1.0, 0.0], [1.0, 1.0]], reps=(3, 3))


@pytest.fixture
def theta0() -> ParameterPoint:
    return ParameterPoint.origin(2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260808)
