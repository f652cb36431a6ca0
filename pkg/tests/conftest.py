import numpy as np
import pytest

from qubognn.graphgen import Graph


@pytest.fixture
def triangle():
    return Graph(3, ((0, 1), (1, 2), (0, 2)))


@pytest.fixture
def k4():
    return Graph(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))


@pytest.fixture
def path3():
    return Graph(3, ((0, 1), (1, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
