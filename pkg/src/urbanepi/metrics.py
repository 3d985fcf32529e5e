"""Observables over simulation results: reproduction numbers, thresholds,
geographic spread, entropy, and cross-replica predictability."""

from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .contacts import ContactKernel
from .epidemic import EpidemicParams, SimulationResult, run
from .errors import ConfigurationError
from .network import DegreeStats
from .population import N_AGE_GROUPS, Territory
from .rngtools import substream

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Reproduction number R(t)
# ---------------------------------------------------------------------------

@dataclass
class ReproductionSeries:
    """Mean lifetime secondary infections of the cohort infected on day t."""

    t: np.ndarray
    r: np.ndarray
    cohort: np.ndarray  # pooled cohort sizes across runs


def reproduction_number(results: list[SimulationResult],
                        age_group: int | None = None) -> ReproductionSeries:
    """R(t) pooled across runs: total secondary infections of the day-t
    cohort divided by the pooled cohort size. ``age_group`` restricts the
    cohort to one age group."""
    max_day = max((int(r.infection_day.max()) for r in results), default=0)
    sums = np.zeros(max_day + 1)
    counts = np.zeros(max_day + 1, dtype=np.int64)
    for res in results:
        sec = res.secondary_counts()
        mask = res.infection_day >= 0
        if age_group is not None:
            mask &= res.age == age_group
        days = res.infection_day[mask]
        np.add.at(sums, days, sec[mask])
        np.add.at(counts, days, 1)
    defined = counts > 0
    t = np.nonzero(defined)[0]
    return ReproductionSeries(t=t, r=sums[defined] / counts[defined], cohort=counts[defined])


# ---------------------------------------------------------------------------
# Empirical threshold scan
# ---------------------------------------------------------------------------

def hmf_threshold(mean_deg: float, second_moment: float, mu: float = 1.0) -> float:
    """Heterogeneous mean-field epidemic threshold on the beta axis:
    mu * <deg> / (<deg^2> - <deg>)."""
    denom = second_moment - mean_deg
    if denom <= 0:
        return float("inf")
    return mu * mean_deg / denom


@dataclass
class ThresholdScan:
    beta_grid: np.ndarray
    delta: np.ndarray              # epidemic variability, nan where undefined
    rho_samples: list[np.ndarray]  # attack rates per beta (unfiltered)
    beta_c_delta: float            # argmax of delta on the grid
    beta_c_hmf: float              # moment closed form from sampled contact degrees


def epidemic_variability(rho: np.ndarray) -> float:
    """Delta = sqrt(<rho^2> - <rho>^2) / <rho>; nan when <rho> = 0."""
    rho = np.asarray(rho, dtype=float)
    m = rho.mean()
    if m == 0:
        return float("nan")
    return float(np.sqrt(max(0.0, (rho ** 2).mean() - m ** 2)) / m)


_SCAN_STATE: dict = {}


def _scan_init(kernel, mu, beta_grid, master_seed, max_days):
    _SCAN_STATE.update(kernel=kernel, mu=mu, beta_grid=beta_grid,
                       master_seed=master_seed, max_days=max_days)


def _scan_run(task):
    bi, rep = task
    params = EpidemicParams(beta=float(_SCAN_STATE["beta_grid"][bi]),
                            mu=_SCAN_STATE["mu"], max_days=_SCAN_STATE["max_days"])
    res = run(_SCAN_STATE["kernel"], params,
              substream(_SCAN_STATE["master_seed"], bi, rep), replica=rep)
    return bi, res.attack_rate


def threshold_scan(kernel: ContactKernel, mu: float, beta_grid,
                   replicas_per_beta: int, master_seed: int,
                   workers: int = 1, max_days: int = 365,
                   degree_days: int = 25) -> ThresholdScan:
    """Attack-rate variability over a beta grid (all replicas, no outbreak
    filter) plus the HMF moment threshold from sampled contact degrees."""
    beta_grid = np.asarray(beta_grid, dtype=float)
    if beta_grid.size < 2 or np.any(np.diff(beta_grid) <= 0):
        raise ConfigurationError("beta grid must be increasing with >= 2 points")
    tasks = [(bi, rep) for bi in range(beta_grid.size) for rep in range(replicas_per_beta)]
    if workers <= 1:
        _scan_init(kernel, mu, beta_grid, master_seed, max_days)
        out = [_scan_run(t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers, initializer=_scan_init,
                      initargs=(kernel, mu, beta_grid, master_seed, max_days)) as pool:
            out = pool.map(_scan_run, tasks, chunksize=max(1, len(tasks) // (8 * workers)))
    rho_samples = [np.array([rho for i, rho in out if i == bi]) for bi in range(beta_grid.size)]
    delta = np.array([epidemic_variability(r) for r in rho_samples])
    if np.all(np.isnan(delta)):
        beta_c_delta = float("nan")
    else:
        beta_c_delta = float(beta_grid[np.nanargmax(delta)])
    stats = degree_distribution_of_contacts(kernel, degree_days,
                                            substream(master_seed, 999_983))
    return ThresholdScan(beta_grid=beta_grid, delta=delta, rho_samples=rho_samples,
                         beta_c_delta=beta_c_delta,
                         beta_c_hmf=hmf_threshold(stats.mean, stats.second_moment, mu))


def degree_distribution_of_contacts(kernel: ContactKernel, days: int,
                                    seed: int | np.random.Generator) -> DegreeStats:
    """Pooled degree distribution of the sampled daily contact networks."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hist = np.zeros(1, dtype=np.int64)
    for t in range(days):
        pairs = kernel.sample_day(t, rng).pairs
        deg = np.bincount(pairs.ravel(), minlength=kernel.n)
        h = np.bincount(deg)
        if h.size > hist.size:
            hist = np.pad(hist, (0, h.size - hist.size))
        hist[:h.size] += h
    d = np.arange(hist.size, dtype=float)
    total = hist.sum()
    mean = float((d * hist).sum() / total)
    second = float((d ** 2 * hist).sum() / total)
    return DegreeStats(histogram=hist, mean=mean, second_moment=second)


# ---------------------------------------------------------------------------
# Geographic series
# ---------------------------------------------------------------------------

@dataclass
class GeoSeries:
    """Per-day geographic observables; rows with zero prevalence are nan."""

    days: int
    tau: np.ndarray       # fraction of tiles with at least one infected
    i_total: np.ndarray   # total prevalence I_t / N
    q: np.ndarray         # (days, T) normalized per-capita prevalence
    pi: np.ndarray        # (days, T) infected-location probabilities
    entropy: np.ndarray   # normalized entropy of q


def geo_series(result: SimulationResult, territory: Territory) -> GeoSeries:
    i_tile = result.i_tile.astype(float)
    n_j = territory.tile_population.astype(float)
    n_tiles = territory.n_tiles
    i_t = i_tile.sum(axis=1)
    tau = (i_tile > 0).sum(axis=1) / n_tiles
    i_total = i_t / result.n

    with np.errstate(invalid="ignore", divide="ignore"):
        per_capita = i_tile / n_j
        q = per_capita / per_capita.sum(axis=1, keepdims=True)
        pi = i_tile / i_t[:, None]
    empty = i_t == 0
    q[empty] = np.nan
    pi[empty] = np.nan

    if n_tiles == 1:
        entropy = np.where(empty, np.nan, 0.0)
    else:
        ql = np.where(np.nan_to_num(q) > 0, q, 1.0)  # 0 log 0 = 0
        entropy = -np.nansum(q * np.log(ql), axis=1) / np.log(n_tiles)
        entropy[empty] = np.nan
    return GeoSeries(days=result.days, tau=tau, i_total=i_total, q=q, pi=pi,
                     entropy=entropy)


def hellinger_affinity(x: np.ndarray, y: np.ndarray) -> float:
    """sim_H(x, y) = sum_j sqrt(x_j y_j) for probability vectors."""
    return float(np.sqrt(np.asarray(x) * np.asarray(y)).sum())


@dataclass
class NormalizedGeo:
    """Geo observables interpolated onto a peak-normalized time grid."""

    x: np.ndarray        # normalized times, t / t_peak
    i_total: np.ndarray
    pi: np.ndarray       # (len(x), T)
    tau: np.ndarray
    entropy: np.ndarray
    valid: np.ndarray    # where prevalence was defined


def normalize_geo(geo: GeoSeries, result: SimulationResult,
                  n_points: int = 100, t_max: float = 2.0) -> NormalizedGeo:
    """Map a run onto t / t_peak in [0, t_max] by linear interpolation."""
    t_peak = result.peak_day
    if t_peak <= 0:
        raise ConfigurationError("cannot normalize a run with its peak on day 0")
    x = np.linspace(0.0, t_max, n_points)
    t = x * t_peak
    days = np.arange(geo.days)
    valid = t <= days[-1]

    def interp(series):
        return np.interp(t, days, series, right=np.nan)

    i_total = interp(geo.i_total)
    tau = interp(geo.tau)
    # interpolate entropy and pi only across defined days
    defined = ~np.isnan(geo.entropy)
    if defined.any():
        entropy = np.interp(t, days[defined], geo.entropy[defined],
                            left=np.nan, right=np.nan)
        in_range = (t >= days[defined][0]) & (t <= days[defined][-1])
        entropy[~in_range] = np.nan
        pi = np.empty((n_points, geo.pi.shape[1]))
        for j in range(geo.pi.shape[1]):
            pi[:, j] = np.interp(t, days[defined], geo.pi[defined, j])
        pi[~in_range] = np.nan
        valid = valid & in_range
    else:
        entropy = np.full(n_points, np.nan)
        pi = np.full((n_points, geo.pi.shape[1]), np.nan)
        valid = np.zeros(n_points, dtype=bool)
    # renormalize interpolated pi rows
    rowsum = pi.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(rowsum > 0, pi / rowsum, np.nan)
    return NormalizedGeo(x=x, i_total=i_total, pi=pi, tau=tau, entropy=entropy,
                         valid=valid)


@dataclass
class OverlapSeries:
    x: np.ndarray      # time axis (normalized or days)
    theta: np.ndarray  # nan where undefined


def overlap(a: NormalizedGeo, b: NormalizedGeo) -> OverlapSeries:
    """Predictability overlap theta = sim_H(i-vectors) * sim_H(pi-vectors)."""
    if a.x.shape != b.x.shape or not np.allclose(a.x, b.x):
        raise ConfigurationError("overlap needs a common time grid")
    valid = a.valid & b.valid
    ia, ib = a.i_total, b.i_total
    sim_i = np.sqrt(ia * ib) + np.sqrt((1 - ia) * (1 - ib))
    sim_pi = np.nansum(np.sqrt(a.pi * b.pi), axis=1)
    theta = np.where(valid, sim_i * sim_pi, np.nan)
    return OverlapSeries(x=a.x.copy(), theta=theta)


def overlap_pair_raw(geo_a: GeoSeries, geo_b: GeoSeries) -> OverlapSeries:
    """Overlap on the raw day axis, over the common span of two runs."""
    days = min(geo_a.days, geo_b.days)
    ia, ib = geo_a.i_total[:days], geo_b.i_total[:days]
    sim_i = np.sqrt(ia * ib) + np.sqrt((1 - ia) * (1 - ib))
    sim_pi = np.nansum(np.sqrt(geo_a.pi[:days] * geo_b.pi[:days]), axis=1)
    theta = sim_i * sim_pi
    theta[(ia == 0) | (ib == 0)] = np.nan
    return OverlapSeries(x=np.arange(days, dtype=float), theta=theta)


@dataclass
class OverlapEnsemble:
    x: np.ndarray
    mean: np.ndarray
    lo: np.ndarray   # 2.5 percentile
    hi: np.ndarray   # 97.5 percentile
    n_pairs: int


def overlap_ensemble(results: list[SimulationResult], territory: Territory,
                     n_points: int = 100, t_max: float = 2.0) -> OverlapEnsemble:
    """Overlap distribution over all unordered pairs of (outbreak) runs,
    on the peak-normalized time grid."""
    geos = [normalize_geo(geo_series(r, territory), r, n_points, t_max)
            for r in results]
    thetas = []
    for i in range(len(geos)):
        for j in range(i + 1, len(geos)):
            thetas.append(overlap(geos[i], geos[j]).theta)
    if not thetas:
        x = np.linspace(0.0, t_max, n_points)
        nanrow = np.full(n_points, np.nan)
        return OverlapEnsemble(x=x, mean=nanrow, lo=nanrow.copy(), hi=nanrow.copy(),
                               n_pairs=0)
    stack = np.vstack(thetas)
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(stack, axis=0)
        lo = np.nanpercentile(stack, 2.5, axis=0)
        hi = np.nanpercentile(stack, 97.5, axis=0)
    return OverlapEnsemble(x=geos[0].x, mean=mean, lo=lo, hi=hi, n_pairs=len(thetas))


# ---------------------------------------------------------------------------
# Tile statistics
# ---------------------------------------------------------------------------

@dataclass
class TileStats:
    tile_population: np.ndarray     # (T,)
    first_infection: np.ndarray     # (T,) mean day across runs, nan if never
    to_peak: np.ndarray             # (T,) mean first-infection-to-peak interval
    attack_rate: np.ndarray         # (T,) mean final attack rate
    bins: np.ndarray                # (B+1,) population bin edges (log2)
    bin_first: np.ndarray
    bin_to_peak: np.ndarray
    bin_attack: np.ndarray


def tile_stats(results: list[SimulationResult], territory: Territory) -> TileStats:
    """Per-tile infection timing and attack rates, averaged across runs and
    aggregated over log2 population bins (equal weight per tile)."""
    n_tiles = territory.n_tiles
    n_j = territory.tile_population.astype(float)
    first_sum = np.zeros(n_tiles)
    first_cnt = np.zeros(n_tiles)
    peak_sum = np.zeros(n_tiles)
    attack_sum = np.zeros(n_tiles)
    for res in results:
        infected = res.infection_day >= 0
        first = np.full(n_tiles, np.inf)
        np.minimum.at(first, res.tile[infected], res.infection_day[infected])
        hit = np.isfinite(first)
        peak_day = np.argmax(res.i_tile, axis=0)  # earliest day on ties
        first_sum[hit] += first[hit]
        peak_sum[hit] += peak_day[hit] - first[hit]
        first_cnt[hit] += 1
        attack_sum += np.bincount(res.tile[infected], minlength=n_tiles) / n_j
    with np.errstate(invalid="ignore", divide="ignore"):
        first_mean = np.where(first_cnt > 0, first_sum / first_cnt, np.nan)
        to_peak = np.where(first_cnt > 0, peak_sum / first_cnt, np.nan)
    attack = attack_sum / len(results)

    lo = np.floor(np.log2(n_j.min()))
    hi = np.ceil(np.log2(n_j.max())) + 1e-9
    edges = 2.0 ** np.arange(lo, hi + 1)
    which = np.clip(np.digitize(n_j, edges) - 1, 0, edges.size - 2)

    def binned(values):
        out = np.full(edges.size - 1, np.nan)
        for b in range(edges.size - 1):
            vals = values[(which == b) & ~np.isnan(values)]
            if vals.size:
                out[b] = vals.mean()
        return out

    return TileStats(tile_population=territory.tile_population.copy(),
                     first_infection=first_mean, to_peak=to_peak, attack_rate=attack,
                     bins=edges, bin_first=binned(first_mean),
                     bin_to_peak=binned(to_peak), bin_attack=binned(attack))


# ---------------------------------------------------------------------------
# Age-stratified series
# ---------------------------------------------------------------------------

@dataclass
class AgeSeries:
    """Peak-aligned per-age-group infection curves and reproduction numbers."""

    offsets: np.ndarray       # days relative to each run's global peak
    infected: np.ndarray      # (len(offsets), 4) mean infectious count
    r_by_age: np.ndarray      # (len(offsets), 4) pooled R(t), nan where no cohort


def age_series(results: list[SimulationResult], span: int | None = None) -> AgeSeries:
    """Average per-group I(t) and R(t) with day 0 at each run's global
    prevalence peak."""
    if span is None:
        span = max(r.days for r in results)
    offsets = np.arange(-span, span + 1)
    inf_sum = np.zeros((offsets.size, N_AGE_GROUPS))
    inf_cnt = np.zeros(offsets.size)
    r_sum = np.zeros((offsets.size, N_AGE_GROUPS))
    r_cnt = np.zeros((offsets.size, N_AGE_GROUPS), dtype=np.int64)
    for res in results:
        peak = res.peak_day
        idx = np.arange(res.days) - peak + span
        ok = (idx >= 0) & (idx < offsets.size)
        inf_sum[idx[ok]] += res.i_age[ok]
        inf_cnt[idx[ok]] += 1
        sec = res.secondary_counts()
        infected = res.infection_day >= 0
        day_idx = res.infection_day[infected] - peak + span
        groups = res.age[infected]
        keep = (day_idx >= 0) & (day_idx < offsets.size)
        np.add.at(r_sum, (day_idx[keep], groups[keep]), sec[infected][keep])
        np.add.at(r_cnt, (day_idx[keep], groups[keep]), 1)
    covered = inf_cnt > 0
    infected_mean = np.full((offsets.size, N_AGE_GROUPS), np.nan)
    infected_mean[covered] = inf_sum[covered] / inf_cnt[covered, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        r_by_age = np.where(r_cnt > 0, r_sum / r_cnt, np.nan)
    keep_rows = covered
    return AgeSeries(offsets=offsets[keep_rows], infected=infected_mean[keep_rows],
                     r_by_age=r_by_age[keep_rows])


# ---------------------------------------------------------------------------
# Mean-field oracles and aligned trajectories
# ---------------------------------------------------------------------------

def sir_final_size(r0: float) -> float:
    """Nontrivial fixed point of rho = 1 - exp(-R0 rho), 0 when R0 <= 1."""
    if r0 <= 1.0:
        return 0.0
    return float(brentq(lambda x: x - (1.0 - np.exp(-r0 * x)), 1e-12, 1.0 - 1e-12))


def deterministic_sir(r0: float, mu: float, i0: float, days: int) -> np.ndarray:
    """Prevalence trajectory of the discrete-time fully-mixed SIR map
    matching the simulator's daily update."""
    s, i = 1.0 - i0, i0
    traj = [i]
    for _ in range(days):
        new = r0 * mu * s * i
        s -= new
        i += new - mu * i
        traj.append(i)
    return np.array(traj)


def aligned_mean_prevalence(results: list[SimulationResult], span: int = 400):
    """Ensemble-mean prevalence with runs aligned at the midpoint of their
    cumulative incidence (a low-noise anchor). Returns (offsets, mean)."""
    offsets = np.arange(-span, span + 1)
    acc = np.zeros(offsets.size)
    cnt = np.zeros(offsets.size)
    for res in results:
        cum = np.cumsum(res.new_infections)
        mid = int(np.searchsorted(cum, cum[-1] / 2.0))
        idx = np.arange(res.days) - mid + span
        ok = (idx >= 0) & (idx < offsets.size)
        acc[idx[ok]] += res.i[ok] / res.n
        cnt[idx[ok]] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(cnt > 0, acc / cnt, np.nan)
    return offsets, mean
