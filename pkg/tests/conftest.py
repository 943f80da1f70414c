import numpy as np
import pytest

from bgtkit.game import Game, standardize


def random_game(rng, n=None, m=None, std=True):
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, 6))
    g = Game(rng.normal(size=(n, m)), rng.normal(size=(n, m)))
    return standardize(g) if std else g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
