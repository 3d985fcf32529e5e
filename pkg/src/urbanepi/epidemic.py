"""Discrete-time stochastic SIR over sampled daily contact sets.

Each day: contacts are sampled from the kernel; every contact between an
infectious and a susceptible agent transmits independently with
probability beta (the infector among same-day successes is chosen
uniformly); infectious agents then recover with probability mu, so an
agent can still transmit on its recovery day and the mean infectious
period is 1/mu days. New infections activate the following day.
"""

from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .contacts import ContactKernel
from .errors import ConfigurationError
from .population import N_AGE_GROUPS
from .rngtools import substream

log = logging.getLogger(__name__)

S, I, R = 0, 1, 2

NO_INFECTOR = -2
INDEX_INFECTOR = -1


@dataclass
class EpidemicParams:
    beta: float
    mu: float
    max_days: int = 365
    index_mode: str = "uniform"      # "uniform" or "tile"
    index_tile: int | None = None    # retained-tile index when mode == "tile"

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError("beta must be in [0, 1]")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigurationError("mu must be in (0, 1]")
        if self.max_days < 1:
            raise ConfigurationError("max_days must be >= 1")
        if self.index_mode not in ("uniform", "tile"):
            raise ConfigurationError(f"unknown index-case mode {self.index_mode!r}")
        if self.index_mode == "tile" and self.index_tile is None:
            raise ConfigurationError("index_mode 'tile' needs index_tile")


@dataclass
class SimulationResult:
    """Event log and per-day aggregates of a single run."""

    config: str
    replica: int
    index_case: int
    n: int
    days: int                      # recorded days, 0..days-1
    s: np.ndarray                  # (days,) susceptible count at start of day
    i: np.ndarray
    r: np.ndarray
    new_infections: np.ndarray     # (days,) infections activating on day t
    i_tile: np.ndarray             # (days, T) infectious residents per tile
    i_age: np.ndarray              # (days, 4)
    infection_day: np.ndarray      # (n,) -1 if never infected
    infector: np.ndarray           # (n,) agent id, INDEX_INFECTOR, or NO_INFECTOR
    recovery_day: np.ndarray       # (n,) -1 if never recovered
    tile: np.ndarray = field(repr=False)     # agent tile indices (shared)
    age: np.ndarray = field(repr=False)      # agent age groups (shared)
    completed: bool = True         # False when max_days hit with I > 0

    @property
    def attack_rate(self) -> float:
        return float((self.infection_day >= 0).sum()) / self.n

    @property
    def peak_day(self) -> int:
        """Earliest day of maximum prevalence."""
        return int(np.argmax(self.i))

    def secondary_counts(self) -> np.ndarray:
        """Number of infections each agent eventually caused."""
        sec = np.zeros(self.n, dtype=np.int64)
        valid = self.infector >= 0
        np.add.at(sec, self.infector[valid], 1)
        return sec


def _select_index_case(kernel: ContactKernel, params: EpidemicParams,
                       rng: np.random.Generator) -> int:
    tile = kernel.graph.population.tile
    if params.index_mode == "uniform":
        return int(rng.integers(kernel.n))
    t = params.index_tile
    if not 0 <= t < kernel.graph.population.territory.n_tiles:
        raise ConfigurationError(f"index tile {t} is not a retained tile")
    candidates = np.nonzero(tile == t)[0]
    return int(candidates[rng.integers(candidates.size)])


def run(kernel: ContactKernel, params: EpidemicParams,
        seed: int | np.random.Generator, replica: int = 0,
        record_contacts: bool = False) -> SimulationResult:
    """Run one SIR realization until extinction or ``max_days``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = kernel.n
    pop = kernel.graph.population
    n_tiles = pop.territory.n_tiles

    status = np.zeros(n, dtype=np.int8)
    infection_day = np.full(n, -1, dtype=np.int32)
    infector = np.full(n, NO_INFECTOR, dtype=np.int64)
    recovery_day = np.full(n, -1, dtype=np.int32)

    index_case = _select_index_case(kernel, params, rng)
    status[index_case] = I
    infection_day[index_case] = 0
    infector[index_case] = INDEX_INFECTOR

    s_series, i_series, r_series, new_series = [], [], [], []
    i_tile_series, i_age_series = [], []
    contact_log = [] if record_contacts else None
    new_today = 1  # the index case activates on day 0

    t = 0
    while True:
        inf_mask = status == I
        n_inf = int(inf_mask.sum())
        n_rec = int((status == R).sum())
        s_series.append(n - n_inf - n_rec)
        i_series.append(n_inf)
        r_series.append(n_rec)
        new_series.append(new_today)
        i_tile_series.append(np.bincount(pop.tile[inf_mask], minlength=n_tiles))
        i_age_series.append(np.bincount(pop.age[inf_mask], minlength=N_AGE_GROUPS))
        if n_inf == 0 or t >= params.max_days:
            break

        contacts = kernel.sample_day(t, rng)
        if record_contacts:
            contact_log.append(contacts)
        u, v = contacts.pairs[:, 0], contacts.pairs[:, 1]
        u_inf, v_inf = inf_mask[u], inf_mask[v]
        u_sus, v_sus = status[u] == S, status[v] == S
        src = np.concatenate([u[u_inf & v_sus], v[v_inf & u_sus]])
        dst = np.concatenate([v[u_inf & v_sus], u[v_inf & u_sus]])
        hit = rng.random(dst.size) < params.beta
        src, dst = src[hit], dst[hit]
        if dst.size:
            # several infectious contacts can hit one target the same day;
            # pick the infector uniformly among the successful ones
            perm = rng.permutation(dst.size)
            src, dst = src[perm], dst[perm]
            new, first = np.unique(dst, return_index=True)
            new_src = src[first]
        else:
            new = np.empty(0, dtype=np.int64)
            new_src = new

        # recovery after transmission: agents can infect on their recovery day
        inf_agents = np.nonzero(inf_mask)[0]
        recovering = inf_agents[rng.random(inf_agents.size) < params.mu]
        status[recovering] = R
        recovery_day[recovering] = t

        status[new] = I
        infection_day[new] = t + 1
        infector[new] = new_src
        new_today = new.size
        t += 1

    days = len(i_series)
    result = SimulationResult(
        config=kernel.config.value, replica=replica, index_case=index_case,
        n=n, days=days,
        s=np.array(s_series), i=np.array(i_series), r=np.array(r_series),
        new_infections=np.array(new_series),
        i_tile=np.array(i_tile_series), i_age=np.array(i_age_series),
        infection_day=infection_day, infector=infector, recovery_day=recovery_day,
        tile=pop.tile, age=pop.age,
        completed=bool(i_series[-1] == 0))
    if record_contacts:
        result.contact_log = contact_log
    return result


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

_POOL_STATE: dict = {}


def _pool_init(kernel, params, master_seed):
    _POOL_STATE.update(kernel=kernel, params=params, master_seed=master_seed)


def _pool_run(replica: int) -> SimulationResult:
    return run(_POOL_STATE["kernel"], _POOL_STATE["params"],
               substream(_POOL_STATE["master_seed"], replica), replica=replica)


def run_ensemble(kernel: ContactKernel, params: EpidemicParams, n_replicas: int,
                 master_seed: int, workers: int = 1) -> list[SimulationResult]:
    """Independent replicas on a fixed kernel; replica seeds derive from
    ``master_seed`` so the result list is schedule-independent."""
    if n_replicas < 1:
        raise ConfigurationError("n_replicas must be >= 1")
    if workers <= 1:
        return [run(kernel, params, substream(master_seed, i), replica=i)
                for i in range(n_replicas)]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers, initializer=_pool_init,
                  initargs=(kernel, params, master_seed)) as pool:
        results = pool.map(_pool_run, range(n_replicas))
    return results  # pool.map preserves replica order


def outbreak_filter(results: list[SimulationResult], threshold: float = 0.25):
    """Partition replicas into (outbreaks, extinctions) by attack rate."""
    outbreaks = [r for r in results if r.attack_rate > threshold]
    extinctions = [r for r in results if r.attack_rate <= threshold]
    if not outbreaks:
        log.warning("outbreak filter: no replica exceeded attack rate %.2f", threshold)
    return outbreaks, extinctions


def r0_index(results: list[SimulationResult]) -> np.ndarray:
    """Secondary infections directly caused by the index case, per run."""
    return np.array([int((r.infector == r.index_case).sum()) for r in results])
