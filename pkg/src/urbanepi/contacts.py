"""Daily contact sampling under the six contact-model configurations.

Every configuration is normalized so that the analytic total contact mass
sum_{u<v} p_{u,v} equals the social-network edge count |E|, making the
configurations directly comparable. Household pairs meet daily (p = 1),
acquaintance pairs half of the days (p = 0.5, or 1 under SN), and the
remaining "fortuitous" mass W_F = |E| - |E_H| - |E_A|/2 is spread over
non-edge pairs uniformly (HN), by age mixing (AN), by inverse distance
(DN), or both (ADN). HM spreads the whole mass uniformly over all pairs.

Small instances sample every pair with an exact Bernoulli trial; large
instances sample a Poisson total count and draw endpoints from alias
tables over (tile, age-group) cell pairs, a thinning approximation whose
per-pair error is O(p^2) and negligible at the densities used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, UrbanEpiError
from .network import SocialGraph, validate_mixing_matrix
from .population import N_AGE_GROUPS
from .rngtools import AliasSampler


class Configuration(str, Enum):
    HM = "HM"    # homogeneous mixing
    SN = "SN"    # static network
    HN = "HN"    # homogeneous noise
    AN = "AN"    # age-based noise
    DN = "DN"    # distance-based noise
    ADN = "ADN"  # age- and distance-based noise


NOISE_CONFIGS = (Configuration.HN, Configuration.AN, Configuration.DN, Configuration.ADN)

LAYER_HOUSEHOLD, LAYER_ACQUAINTANCE, LAYER_FORTUITOUS = 0, 1, 2

ACQ_DAILY_PROBABILITY = 0.5  # 1.0 under SN


@dataclass
class ContactSet:
    """Unordered agent pairs in contact on one day."""

    day: int
    pairs: np.ndarray  # (M, 2), u < v
    layer: np.ndarray  # (M,) LAYER_* codes


def _pack(u, v, n: int) -> np.ndarray:
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return lo * n + hi


def _accumulate_distinct(existing: np.ndarray, fresh: np.ndarray, m: int) -> np.ndarray:
    """Append fresh keys keeping first occurrences in draw order, capped at m."""
    combined = np.concatenate([existing, fresh])
    _, first = np.unique(combined, return_index=True)
    first.sort()
    return combined[first[:m]]


class ContactKernel:
    """Per-configuration machinery producing each day's contact set."""

    def __init__(self, config: Configuration, graph: SocialGraph, s=None,
                 exact_pair_limit: int = 250_000):
        config = Configuration(config)
        if graph.m_total == 0:
            raise ConfigurationError("contact kernel needs a nonempty graph")
        self.config = config
        self.graph = graph
        self.n = graph.n
        self.m_h = graph.m_h
        self.m_a = graph.m_a
        self.m_total = graph.m_total
        self.w_f = self.m_total - self.m_h - self.m_a / 2.0
        if self.w_f < -1e-9:
            raise UrbanEpiError("internal invariant violated: negative fortuitous mass")
        self.n_pairs = self.n * (self.n - 1) // 2
        territory = graph.population.territory

        needs_s = config in (Configuration.AN, Configuration.ADN)
        self.s = validate_mixing_matrix(s) if s is not None else None
        if needs_s and self.s is None:
            raise ConfigurationError(f"configuration {config.value} needs a mixing matrix")

        self.edge_keys = np.sort(_pack(
            np.concatenate([graph.e_h[:, 0], graph.e_a[:, 0]]),
            np.concatenate([graph.e_h[:, 1], graph.e_a[:, 1]]), self.n))
        self.hh_keys = np.sort(_pack(graph.e_h[:, 0], graph.e_h[:, 1], self.n)) \
            if graph.e_h.size else np.empty(0, dtype=np.int64)

        self._dist_inv = 1.0 / territory.distance_matrix()
        self._cell_of = (graph.population.tile.astype(np.int64) * N_AGE_GROUPS
                         + graph.population.age)
        self._build_cells()

        if config == Configuration.HM:
            self.p_hm = self.m_total / self.n_pairs
            if self.p_hm > 1.0:
                raise ConfigurationError("HM per-pair probability exceeds 1; graph too dense")

        self.exact = self.n_pairs <= exact_pair_limit
        if self.exact:
            self._build_exact_table()

    # -- construction ------------------------------------------------------

    def _pair_factor(self, cell_u, cell_v) -> np.ndarray:
        """Fortuitous weight factor between cells (vectorized)."""
        cfg = self.config
        tile_u, age_u = cell_u // N_AGE_GROUPS, cell_u % N_AGE_GROUPS
        tile_v, age_v = cell_v // N_AGE_GROUPS, cell_v % N_AGE_GROUPS
        out = np.ones(np.broadcast(np.asarray(cell_u), np.asarray(cell_v)).shape)
        if cfg in (Configuration.AN, Configuration.ADN):
            out = out * self.s[age_u, age_v]
        if cfg in (Configuration.DN, Configuration.ADN):
            out = out * self._dist_inv[tile_u, tile_v]
        return out

    def _build_cells(self):
        """Cell-pair weight table for the fortuitous layer (all noise configs)."""
        uniq, inverse = np.unique(self._cell_of, return_inverse=True)
        self._cells = uniq
        self._cell_index = inverse  # agent -> dense cell id
        n_cells = uniq.size
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse, minlength=n_cells)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        self._cell_counts = counts
        self._cell_members_flat = order
        self._cell_offsets = offsets

        if self.config not in NOISE_CONFIGS:
            self._fort_norm = None
            return
        ci, cj = np.triu_indices(n_cells, 0)
        factor = self._pair_factor(uniq[ci], uniq[cj])
        cand = np.where(ci != cj, counts[ci] * counts[cj],
                        counts[ci] * (counts[ci] - 1) // 2).astype(np.int64)
        # remove existing edges from the candidate pair counts, exactly
        edges = np.vstack([self.graph.e_h, self.graph.e_a])
        ecu = self._cell_index[edges[:, 0]]
        ecv = self._cell_index[edges[:, 1]]
        lo, hi = np.minimum(ecu, ecv), np.maximum(ecu, ecv)
        flat = np.zeros((n_cells, n_cells), dtype=np.int64)
        np.add.at(flat, (lo, hi), 1)
        cand = cand - flat[ci, cj]
        if np.any(cand < 0):
            raise UrbanEpiError("internal invariant violated: negative candidate count")
        mass = factor * cand
        self._fort_ci, self._fort_cj = ci, cj
        self._fort_factor = factor
        self._fort_cand = cand
        self._fort_norm = float(mass.sum())  # Z
        if self._fort_norm <= 0 and self.w_f > 0:
            raise ConfigurationError("no candidate pairs for the fortuitous layer")
        positive = mass > 0
        self._fort_alias = AliasSampler(mass[positive]) if positive.any() else None
        self._fort_pos = np.nonzero(positive)[0]
        if self.w_f > 0 and self._fort_norm > 0:
            pmax = self.w_f * factor[positive].max() / self._fort_norm
            if pmax > 1.0:
                raise UrbanEpiError(f"fortuitous per-pair probability {pmax:.3g} exceeds 1")

    def _build_exact_table(self):
        n = self.n
        iu, iv = np.triu_indices(n, 1)
        keys = iu.astype(np.int64) * n + iv
        p = np.zeros(self.n_pairs)
        layer = np.full(self.n_pairs, LAYER_FORTUITOUS, dtype=np.int8)
        is_edge = np.isin(keys, self.edge_keys, assume_unique=True)
        is_hh = np.isin(keys, self.hh_keys, assume_unique=True)
        is_acq = is_edge & ~is_hh
        layer[is_hh] = LAYER_HOUSEHOLD
        layer[is_acq] = LAYER_ACQUAINTANCE
        cfg = self.config
        if cfg == Configuration.HM:
            p[:] = self.p_hm
        elif cfg == Configuration.SN:
            p[is_edge] = 1.0
        else:
            p[is_hh] = 1.0
            p[is_acq] = ACQ_DAILY_PROBABILITY
            if self.w_f > 0:
                non_edge = ~is_edge
                factor = self._pair_factor(self._cell_of[iu[non_edge]],
                                           self._cell_of[iv[non_edge]])
                p[non_edge] = self.w_f * factor / self._fort_norm
        self._exact_iu, self._exact_iv = iu, iv
        self._exact_p, self._exact_layer = p, layer

    # -- analytic probabilities -------------------------------------------

    def pair_probability(self, u: int, v: int) -> float:
        """Exact analytic daily contact probability for one pair."""
        if u == v:
            raise ValueError("no self-contacts")
        key = _pack(np.int64(u), np.int64(v), self.n)
        cfg = self.config
        if cfg == Configuration.HM:
            return self.p_hm
        pos = np.searchsorted(self.edge_keys, key)
        is_edge = pos < self.edge_keys.size and self.edge_keys[pos] == key
        if cfg == Configuration.SN:
            return 1.0 if is_edge else 0.0
        if is_edge:
            hpos = np.searchsorted(self.hh_keys, key)
            is_hh = hpos < self.hh_keys.size and self.hh_keys[hpos] == key
            return 1.0 if is_hh else ACQ_DAILY_PROBABILITY
        if self.w_f <= 0:
            return 0.0
        factor = float(self._pair_factor(np.asarray(self._cell_of[u]),
                                         np.asarray(self._cell_of[v])))
        return self.w_f * factor / self._fort_norm

    def analytic_total_mass(self) -> float:
        """sum_{u<v} p_{u,v}, computed by exact per-layer summation."""
        cfg = self.config
        if cfg == Configuration.HM:
            return self.p_hm * self.n_pairs
        if cfg == Configuration.SN:
            return float(self.m_total)
        fort = 0.0
        if self.w_f > 0:
            fort = self.w_f * float((self._fort_factor * self._fort_cand).sum()) / self._fort_norm
        return self.m_h * 1.0 + self.m_a * ACQ_DAILY_PROBABILITY + fort

    def expected_contacts_per_agent(self) -> float:
        """Mean over agents of sum_v p_{u,v} (equals 2|E|/N)."""
        return 2.0 * self.analytic_total_mass() / self.n

    def fortuitous_row_mass(self) -> np.ndarray:
        """Per-agent expected number of daily fortuitous contacts."""
        if self.config == Configuration.HM:
            return np.full(self.n, self.p_hm * (self.n - 1))
        if self.config == Configuration.SN or self.w_f <= 0:
            return np.zeros(self.n)
        cells = self._cells
        factor_cc = self._pair_factor(cells[:, None], cells[None, :])
        per_cell = factor_cc @ self._cell_counts - np.diagonal(factor_cc)
        row = per_cell[self._cell_index].astype(float)
        # subtract the factors of this agent's existing edges
        edges = np.vstack([self.graph.e_h, self.graph.e_a])
        ef = self._pair_factor(self._cell_of[edges[:, 0]], self._cell_of[edges[:, 1]])
        np.subtract.at(row, edges[:, 0], ef)
        np.subtract.at(row, edges[:, 1], ef)
        return self.w_f * row / self._fort_norm

    # -- day sampling -------------------------------------------------------

    def sample_day(self, t: int, rng: np.random.Generator) -> ContactSet:
        if self.exact:
            hit = rng.random(self.n_pairs) < self._exact_p
            pairs = np.column_stack([self._exact_iu[hit], self._exact_iv[hit]])
            return ContactSet(day=t, pairs=pairs, layer=self._exact_layer[hit])
        cfg = self.config
        if cfg == Configuration.HM:
            m = rng.poisson(self.m_total)
            pairs = self._distinct_uniform_pairs(rng, m, reject_edges=False)
            return ContactSet(day=t, pairs=pairs,
                              layer=np.full(pairs.shape[0], LAYER_FORTUITOUS, np.int8))
        parts = [self.graph.e_h]
        layers = [np.full(self.m_h, LAYER_HOUSEHOLD, np.int8)]
        if cfg == Configuration.SN:
            parts.append(self.graph.e_a)
            layers.append(np.full(self.m_a, LAYER_ACQUAINTANCE, np.int8))
        else:
            mask = rng.random(self.m_a) < ACQ_DAILY_PROBABILITY
            parts.append(self.graph.e_a[mask])
            layers.append(np.full(int(mask.sum()), LAYER_ACQUAINTANCE, np.int8))
            if self.w_f > 0:
                m = rng.poisson(self.w_f)
                if cfg == Configuration.HN:
                    fort = self._distinct_uniform_pairs(rng, m, reject_edges=True)
                else:
                    fort = self._fortuitous_cell_pairs(rng, m)
                parts.append(fort)
                layers.append(np.full(fort.shape[0], LAYER_FORTUITOUS, np.int8))
        return ContactSet(day=t, pairs=np.vstack(parts), layer=np.concatenate(layers))

    def _distinct_uniform_pairs(self, rng, m: int, reject_edges: bool) -> np.ndarray:
        """m distinct uniform pairs, optionally excluding existing edges."""
        if m == 0:
            return np.empty((0, 2), dtype=np.int64)
        keys = np.empty(0, dtype=np.int64)
        for _ in range(200):
            need = m - keys.size
            if need <= 0:
                break
            u = rng.integers(0, self.n, size=2 * need)
            v = rng.integers(0, self.n, size=2 * need)
            ok = u != v
            k = _pack(u[ok], v[ok], self.n)
            if reject_edges:
                pos = np.searchsorted(self.edge_keys, k)
                hit = (pos < self.edge_keys.size) & (self.edge_keys[np.minimum(pos, self.edge_keys.size - 1)] == k)
                k = k[~hit]
            keys = _accumulate_distinct(keys, k, m)
        else:
            raise UrbanEpiError("pair rejection loop exceeded its iteration cap")
        return np.column_stack([keys // self.n, keys % self.n])

    def _fortuitous_cell_pairs(self, rng, m: int) -> np.ndarray:
        """m distinct non-edge pairs drawn from the cell-pair alias table."""
        if m == 0 or self._fort_alias is None:
            return np.empty((0, 2), dtype=np.int64)
        flat = self._cell_members_flat
        off = self._cell_offsets
        counts = self._cell_counts
        keys = np.empty(0, dtype=np.int64)
        for _ in range(200):
            need = m - keys.size
            if need <= 0:
                break
            idx = self._fort_pos[self._fort_alias.sample(rng, int(1.2 * need) + 8)]
            ca, cb = self._fort_ci[idx], self._fort_cj[idx]
            u = flat[off[ca] + rng.integers(0, counts[ca])]
            v = flat[off[cb] + rng.integers(0, counts[cb])]
            ok = u != v
            k = _pack(u[ok], v[ok], self.n)
            pos = np.searchsorted(self.edge_keys, k)
            hit = (pos < self.edge_keys.size) & (self.edge_keys[np.minimum(pos, self.edge_keys.size - 1)] == k)
            k = k[~hit]
            keys = _accumulate_distinct(keys, k, m)
        else:
            raise UrbanEpiError("fortuitous rejection loop exceeded its iteration cap")
        return np.column_stack([keys // self.n, keys % self.n])


def make_kernel(config, graph: SocialGraph, s=None,
                exact_pair_limit: int = 250_000) -> ContactKernel:
    """Build the daily-contact kernel for one configuration."""
    return ContactKernel(config, graph, s=s, exact_pair_limit=exact_pair_limit)


# ---------------------------------------------------------------------------
# Calibration and diagnostics
# ---------------------------------------------------------------------------

def calibrate_beta(kernel: ContactKernel, r0_target: float, mu: float) -> float:
    """Per-contact transmission probability giving the target index-case
    reproduction number: beta = R0 * mu / (2|E|/N)."""
    if r0_target < 0:
        raise ConfigurationError("R0 target must be nonnegative")
    if not 0 < mu <= 1:
        raise ConfigurationError("mu must be in (0, 1]")
    if kernel.m_total == 0:
        raise ConfigurationError("cannot calibrate on an empty graph")
    mean_mass = kernel.expected_contacts_per_agent()
    return r0_target * mu / mean_mass


def index_case_secondary_events(kernel: ContactKernel, beta: float, mu: float,
                                episodes: int, seed: int | np.random.Generator):
    """Monte-Carlo mean of transmission events caused by a uniformly chosen
    index case over its infectious lifetime, in an otherwise susceptible,
    non-depleting population (the defining expectation of R0^index).

    Returns (mean, standard error).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    deg_h = np.bincount(np.concatenate([kernel.graph.e_h[:, 0], kernel.graph.e_h[:, 1]]),
                        minlength=kernel.n) if kernel.m_h else np.zeros(kernel.n, np.int64)
    deg_a = np.bincount(np.concatenate([kernel.graph.e_a[:, 0], kernel.graph.e_a[:, 1]]),
                        minlength=kernel.n) if kernel.m_a else np.zeros(kernel.n, np.int64)
    row_f = kernel.fortuitous_row_mass()
    cfg = kernel.config
    u = rng.integers(0, kernel.n, size=episodes)
    life = rng.geometric(mu, size=episodes)
    if cfg == Configuration.HM:
        contacts = rng.poisson(life * row_f[u])
    elif cfg == Configuration.SN:
        contacts = life * (deg_h[u] + deg_a[u])
    else:
        contacts = (life * deg_h[u]
                    + rng.binomial(life * deg_a[u], ACQ_DAILY_PROBABILITY)
                    + rng.poisson(life * row_f[u]))
    events = rng.binomial(contacts, beta)
    return float(events.mean()), float(events.std(ddof=1) / np.sqrt(episodes))


@dataclass
class MassReport:
    target: float          # |E|
    analytic: float        # exact per-layer summation of p
    mc_mean: float         # Monte-Carlo mean of |E^t|
    mc_std: float
    trials: int


def kernel_mass_check(kernel: ContactKernel, trials: int = 1000,
                      seed: int | np.random.Generator = 0) -> MassReport:
    """Compare the analytic contact mass and sampled day sizes against |E|."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = np.array([kernel.sample_day(t, rng).pairs.shape[0] for t in range(trials)])
    return MassReport(target=float(kernel.m_total),
                      analytic=kernel.analytic_total_mass(),
                      mc_mean=float(sizes.mean()), mc_std=float(sizes.std(ddof=1)),
                      trials=trials)
