"""Shared fixtures: the two reference channels and common metrics."""

import numpy as np
import pytest

from gldx import Channel, Distribution


@pytest.fixture(scope="session")
def bsc():
    return Channel.from_matrix([[0.9, 0.1], [0.1, 0.9]])


@pytest.fixture(scope="session")
def wide():
    # 2 inputs, 3 outputs; full support.
    return Channel.from_matrix([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])


@pytest.fixture(scope="session")
def noiseless():
    return Channel.from_matrix([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture(scope="session")
def unif2():
    return Distribution.uniform(2)


def random_channel(rng: np.random.Generator, kx: int, ky: int) -> Channel:
    raw = rng.random((kx, ky)) + 0.05
    return Channel.from_matrix(raw / raw.sum(axis=1, keepdims=True))
