"""Territory grid and age-stratified synthetic population.

The territory is a rectangular bounding box in a local metric plane,
partitioned into square tiles of fixed side. Tiles keep an integer resident
count drawn from a density source; tiles below a minimum population are
dropped without redistributing their mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError

AGE_GROUP_NAMES = ("children", "young", "adults", "elderly")
AGE_GROUP_BOUNDS = ((0, 17), (18, 34), (35, 64), (65, None))
N_AGE_GROUPS = 4

CHILDREN, YOUNG, ADULTS, ELDERLY = range(4)


# ---------------------------------------------------------------------------
# Density sources
# ---------------------------------------------------------------------------

class UniformDensity:
    """Constant density with a fixed total mass over the whole grid."""

    def __init__(self, total: float):
        if total < 0:
            raise InputError("total population mass must be nonnegative")
        self.total = float(total)

    def masses(self, rows: int, cols: int, tile_side: float) -> np.ndarray:
        return np.full((rows, cols), self.total / (rows * cols))


class RadialDensity:
    """Exponential decay from a center, normalized to a fixed total mass.

    ``center`` is in (row, col) fractional grid coordinates; defaults to the
    grid midpoint. ``scale`` is the decay length in meters.
    """

    def __init__(self, total: float, scale: float, center: tuple[float, float] | None = None):
        if total < 0 or scale <= 0:
            raise InputError("radial density needs total >= 0 and scale > 0")
        self.total = float(total)
        self.scale = float(scale)
        self.center = center

    def masses(self, rows: int, cols: int, tile_side: float) -> np.ndarray:
        cr, cc = self.center if self.center is not None else ((rows - 1) / 2, (cols - 1) / 2)
        r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
        dist = tile_side * np.hypot(r - cr, c - cc)
        w = np.exp(-dist / self.scale)
        return self.total * w / w.sum()


class CsvGridDensity:
    """Per-tile populations from a CSV file with header ``row,col,population``."""

    def __init__(self, path: str):
        self.path = path
        self.total = None  # total is whatever the file sums to

    def masses(self, rows: int, cols: int, tile_side: float) -> np.ndarray:
        try:
            data = np.loadtxt(self.path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read density CSV {self.path!r}: {exc}") from exc
        grid = np.zeros((rows, cols))
        if data.size == 0:
            return grid
        r = data[:, 0].astype(int)
        c = data[:, 1].astype(int)
        if np.any(r < 0) or np.any(r >= rows) or np.any(c < 0) or np.any(c >= cols):
            raise InputError(f"density CSV {self.path!r} has tiles outside the grid")
        if np.any(data[:, 2] < 0):
            raise InputError(f"density CSV {self.path!r} has negative populations")
        np.add.at(grid, (r, c), data[:, 2])
        return grid


def largest_remainder_round(masses: np.ndarray, total: int | None = None) -> np.ndarray:
    """Round nonnegative masses to integers preserving the (rounded) total."""
    m = np.asarray(masses, dtype=float).ravel()
    if total is None:
        total = int(round(m.sum()))
    floors = np.floor(m).astype(np.int64)
    short = total - int(floors.sum())
    if short > 0:
        order = np.argsort(-(m - floors), kind="stable")
        floors[order[:short]] += 1
    elif short < 0:
        # requested total below the floor sum: trim the largest fractions' floors
        order = np.argsort(m - floors, kind="stable")
        take = order[floors[order] > 0][: -short]
        floors[take] -= 1
    return floors.reshape(np.shape(masses))


# ---------------------------------------------------------------------------
# Territory
# ---------------------------------------------------------------------------

@dataclass
class Territory:
    """Retained tiles of a gridded bounding box. Treated as immutable."""

    origin: tuple[float, float]
    tile_side: float
    grid_rows: int
    grid_cols: int
    tile_row: np.ndarray  # (T,) grid row of each retained tile
    tile_col: np.ndarray  # (T,)
    tile_population: np.ndarray  # (T,) int
    centers: np.ndarray = field(init=False)  # (T, 2) meters

    def __post_init__(self):
        x0, y0 = self.origin
        cx = x0 + (self.tile_col + 0.5) * self.tile_side
        cy = y0 + (self.tile_row + 0.5) * self.tile_side
        self.centers = np.column_stack([cx, cy])

    @property
    def n_tiles(self) -> int:
        return self.tile_population.size

    @property
    def total_population(self) -> int:
        return int(self.tile_population.sum())

    def distance_matrix(self) -> np.ndarray:
        """Pairwise discretized tile distance: max(l/2, center distance)."""
        d = self.centers[:, None, :] - self.centers[None, :, :]
        dist = np.hypot(d[..., 0], d[..., 1])
        return np.maximum(self.tile_side / 2.0, dist)


def tile_distance(territory: Territory, a: int, b: int) -> float:
    """Discretized distance between retained tiles ``a`` and ``b`` (meters)."""
    dx, dy = territory.centers[a] - territory.centers[b]
    return max(territory.tile_side / 2.0, float(np.hypot(dx, dy)))


def build_grid(bbox: tuple[float, float, float, float], tile_side: float,
               density, min_pop: int = 10) -> Territory:
    """Partition ``bbox`` (x0, y0, x1, y1, meters) into square tiles and
    assign integer populations from a density source.

    Tiles with population below ``min_pop`` are dropped; their mass is not
    reassigned, so the realized total may be below the density total.
    """
    x0, y0, x1, y1 = map(float, bbox)
    if tile_side <= 0:
        raise ConfigurationError("tile side must be positive")
    if x1 - x0 < tile_side or y1 - y0 < tile_side:
        raise ConfigurationError("bounding box sides must be at least one tile side")
    if min_pop < 1:
        raise ConfigurationError("min_pop must be >= 1")
    rows = int(np.ceil((y1 - y0) / tile_side))
    cols = int(np.ceil((x1 - x0) / tile_side))
    masses = density.masses(rows, cols, tile_side)
    if masses.shape != (rows, cols):
        raise InputError(f"density source returned shape {masses.shape}, expected {(rows, cols)}")
    total = getattr(density, "total", None)
    pops = largest_remainder_round(masses, None if total is None else int(round(total)))
    keep = pops >= min_pop
    if not keep.any():
        raise ConfigurationError(f"no tile reaches the minimum population of {min_pop}")
    r, c = np.nonzero(keep)
    return Territory(origin=(x0, y0), tile_side=tile_side, grid_rows=rows, grid_cols=cols,
                     tile_row=r.astype(np.int32), tile_col=c.astype(np.int32),
                     tile_population=pops[keep].astype(np.int64))


# ---------------------------------------------------------------------------
# Population
# ---------------------------------------------------------------------------

@dataclass
class Population:
    """Agents with a tile of residence and an age group. Treated as immutable.

    Agent ids are dense in [0, n); agents of the same tile are contiguous.
    Fitness and household membership are assigned by the network module.
    """

    territory: Territory
    tile: np.ndarray  # (n,) retained-tile index per agent
    age: np.ndarray   # (n,) age-group index per agent

    @property
    def n(self) -> int:
        return self.tile.size


def populate(territory: Territory, age_distribution, seed: int | np.random.Generator) -> Population:
    """Create one agent per resident, sampling age groups i.i.d. from
    ``age_distribution`` (length-4 probability vector)."""
    p = np.asarray(age_distribution, dtype=float)
    if p.shape != (N_AGE_GROUPS,):
        raise InputError(f"age distribution must have {N_AGE_GROUPS} entries")
    if np.any(p < 0):
        raise InputError("age distribution has negative probabilities")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InputError(f"age distribution sums to {p.sum()}, expected 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = territory.total_population
    tile = np.repeat(np.arange(territory.n_tiles, dtype=np.int32),
                     territory.tile_population)
    age = rng.choice(N_AGE_GROUPS, size=n, p=p / p.sum()).astype(np.int8)
    return Population(territory=territory, tile=tile, age=age)
