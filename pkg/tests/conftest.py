import numpy as np
import pytest

from urbanepi.data import (DEFAULT_AGE_DISTRIBUTION, DEFAULT_HOUSEHOLD_SIZES,
                           DEFAULT_MIXING_MATRIX)
from urbanepi.network import build_social_graph
from urbanepi.population import RadialDensity, Territory, build_grid, populate


def make_territory(populations, tile_side=500.0, cols=None):
    """Territory with explicit tile populations laid out on one grid row
    (or a rows x cols block when cols is given)."""
    populations = np.asarray(populations, dtype=np.int64)
    t = populations.size
    if cols is None:
        cols = t
    rows = -(-t // cols)
    return Territory(origin=(0.0, 0.0), tile_side=tile_side,
                     grid_rows=rows, grid_cols=cols,
                     tile_row=np.arange(t) // cols, tile_col=np.arange(t) % cols,
                     tile_population=populations)


@pytest.fixture(scope="session")
def mixing():
    return np.asarray(DEFAULT_MIXING_MATRIX, dtype=float)


@pytest.fixture(scope="session")
def toy_population():
    terr = make_territory([12, 8, 6], tile_side=500.0)
    return populate(terr, DEFAULT_AGE_DISTRIBUTION, seed=7)


@pytest.fixture(scope="session")
def toy_graph(toy_population, mixing):
    return build_social_graph(toy_population, mixing, DEFAULT_HOUSEHOLD_SIZES,
                              kappa=4.0, seed=7)


@pytest.fixture(scope="session")
def desk_population():
    terr = build_grid((0.0, 0.0, 3000.0, 3000.0), 1000.0, RadialDensity(1500, 1200))
    return populate(terr, DEFAULT_AGE_DISTRIBUTION, seed=11)


@pytest.fixture(scope="session")
def desk_graph(desk_population, mixing):
    return build_social_graph(desk_population, mixing, DEFAULT_HOUSEHOLD_SIZES,
                              kappa=8.0, seed=11)
