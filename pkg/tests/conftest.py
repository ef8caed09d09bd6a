import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import make_pool
from patchex.tiles import Tile, TilePool


@pytest.fixture(scope="session")
def pool64() -> TilePool:
    return make_pool(6, 64, seed=11)


@pytest.fixture(scope="session")
def tile64(pool64) -> Tile:
    return pool64[0]


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
