"""Urban social network: household cliques plus the acquaintance graph.

The graph over the synthetic agents is G = (V, E_H ∪ E_A) with disjoint
edge layers. E_H is one clique per household; E_A adds each non-household
pair independently with probability min(1, C·w), where the pair weight
combines age mixing, inverse tile distance, and the two agents' social
fitness, and C is calibrated so the expected mean acquaintance degree hits
a configurable target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, InputError
from .population import N_AGE_GROUPS, Population, ADULTS, ELDERLY, CHILDREN, YOUNG
from .rngtools import AliasSampler

log = logging.getLogger(__name__)

FITNESS_LOG_MEAN = np.log(2.0)
FITNESS_LOG_SIGMA = 0.25


def validate_mixing_matrix(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (N_AGE_GROUPS, N_AGE_GROUPS):
        raise InputError(f"mixing matrix must be {N_AGE_GROUPS}x{N_AGE_GROUPS}")
    if np.any(s < 0):
        raise InputError("mixing matrix entries must be nonnegative")
    if not np.allclose(s, s.T):
        raise InputError("mixing matrix must be symmetric")
    if not s.any():
        raise InputError("mixing matrix must not be all zero")
    return s


# ---------------------------------------------------------------------------
# Households
# ---------------------------------------------------------------------------

@dataclass
class Households:
    """Partition of the agents into co-resident households."""

    household_id: np.ndarray     # (n,) household index per agent
    members: list[np.ndarray]    # agent ids per household
    edges: np.ndarray            # (m, 2) all within-household pairs, u < v
    relaxed: int                 # households built with rules relaxed

    @property
    def n_households(self) -> int:
        return len(self.members)

    def mean_degree(self, n: int) -> float:
        return 2.0 * self.edges.shape[0] / n


def _plan_sizes(total: int, sizes: np.ndarray, probs: np.ndarray,
                rng: np.random.Generator) -> list[int]:
    plan: list[int] = []
    left = total
    while left > 0:
        k = min(int(rng.choice(sizes, p=probs)), left)
        plan.append(k)
        left -= k
    return plan


def build_households(population: Population, size_distribution: dict[int, float],
                     seed: int | np.random.Generator) -> Households:
    """Partition each tile's roster into households.

    Grouping rules: a household containing children has at least one
    adult-or-elderly member; a second co-head is drawn from the same or an
    adjacent age group of the first. Tiles whose roster cannot satisfy the
    rules fall back to relaxed grouping, with a logged warning.
    """
    sizes = np.array(sorted(size_distribution), dtype=int)
    probs = np.array([size_distribution[k] for k in sizes], dtype=float)
    if np.any(sizes < 1) or np.any(probs < 0) or probs.sum() <= 0:
        raise InputError("household size distribution must be over sizes >= 1")
    probs = probs / probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    n = population.n
    household_id = np.full(n, -1, dtype=np.int64)
    members: list[np.ndarray] = []
    relaxed = 0

    order = np.argsort(population.tile, kind="stable")
    boundaries = np.searchsorted(population.tile[order],
                                 np.arange(population.territory.n_tiles + 1))
    for t in range(population.territory.n_tiles):
        roster = order[boundaries[t]:boundaries[t + 1]]
        if roster.size == 0:
            continue
        pools = [list(roster[population.age[roster] == g]) for g in range(N_AGE_GROUPS)]
        for p in pools:
            rng.shuffle(p)

        def take(groups) -> int | None:
            avail = [g for g in groups if pools[g]]
            if not avail:
                return None
            weights = np.array([len(pools[g]) for g in avail], dtype=float)
            g = avail[int(rng.choice(len(avail), p=weights / weights.sum()))]
            return pools[g].pop()

        plan = _plan_sizes(roster.size, sizes, probs, rng)
        # largest households first so parents and co-heads land where needed
        plan.sort(reverse=True)
        hhs: list[list[int]] = []
        # heads: adults or elderly preferred, then young, then children
        for k in plan:
            head = take((ADULTS, ELDERLY))
            if head is None:
                head = take((YOUNG,))
            if head is None:
                head = take((CHILDREN,))
            hhs.append([head])
        # co-heads from the same or an adjacent age group of the head
        for k, hh in zip(plan, hhs):
            if k < 2:
                continue
            g = int(population.age[hh[0]])
            adjacent = [a for a in (g, g - 1, g + 1) if 0 <= a < N_AGE_GROUPS]
            mate = take(adjacent)
            if mate is None:
                mate = take(range(N_AGE_GROUPS))
            if mate is not None:
                hh.append(mate)
        # place children into households that contain an adult or elderly member
        free = [k - len(hh) for k, hh in zip(plan, hhs)]
        tile_relaxed = 0
        while pools[CHILDREN]:
            child = pools[CHILDREN].pop()
            eligible = [i for i, hh in enumerate(hhs)
                        if free[i] > 0 and any(population.age[a] in (ADULTS, ELDERLY) for a in hh)]
            if not eligible:
                eligible = [i for i in range(len(hhs)) if free[i] > 0]
                tile_relaxed += 1
            i = eligible[int(rng.integers(len(eligible)))]
            hhs[i].append(child)
            free[i] -= 1
        # fill leftover slots with the remaining young/adult/elderly agents
        rest = [a for g in (YOUNG, ADULTS, ELDERLY) for a in pools[g]]
        rng.shuffle(rest)
        for i in range(len(hhs)):
            while free[i] > 0 and rest:
                hhs[i].append(rest.pop())
                free[i] -= 1
        if tile_relaxed:
            relaxed += tile_relaxed
            log.warning("tile %d: %d children placed without an adult-or-elderly "
                        "housemate (rules relaxed)", t, tile_relaxed)
        for hh in hhs:
            hid = len(members)
            mem = np.array(sorted(hh), dtype=np.int64)
            household_id[mem] = hid
            members.append(mem)

    edges = []
    for mem in members:
        if mem.size > 1:
            edges.extend(combinations(mem.tolist(), 2))
    e_h = (np.array(edges, dtype=np.int64) if edges else np.empty((0, 2), dtype=np.int64))
    return Households(household_id=household_id, members=members, edges=e_h, relaxed=relaxed)


# ---------------------------------------------------------------------------
# Fitness and pair weights
# ---------------------------------------------------------------------------

def sample_fitness(n: int, seed: int | np.random.Generator) -> np.ndarray:
    """Social fitness f = 1 + Lognormal(ln 2, 1/4); support on (1, inf)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return 1.0 + rng.lognormal(FITNESS_LOG_MEAN, FITNESS_LOG_SIGMA, size=n)


def acquaintance_weight(population: Population, fitness: np.ndarray, s: np.ndarray,
                        u: int, v: int, dist_inv: np.ndarray | None = None) -> float:
    """Unnormalized pair weight s[g_u,g_v] * d(u,v)^-1 * f_u * f_v."""
    if u == v:
        raise ValueError("pair weight needs two distinct agents")
    if dist_inv is None:
        dist_inv = 1.0 / population.territory.distance_matrix()
    return float(s[population.age[u], population.age[v]]
                 * dist_inv[population.tile[u], population.tile[v]]
                 * fitness[u] * fitness[v])


def _pack(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return lo * n + hi


@dataclass
class AcquaintanceBuild:
    edges: np.ndarray        # (m, 2) u < v
    normalization: float     # calibrated C in psi = min(1, C w)
    target_kappa: float
    expected_kappa: float    # analytic expected mean degree after calibration


def build_acquaintances(population: Population, fitness: np.ndarray, s: np.ndarray,
                        kappa: float, households: Households,
                        seed: int | np.random.Generator,
                        method: str = "auto", exact_limit: int = 20_000,
                        cell_exact_pairs: int = 10_000,
                        tol: float = 1e-6) -> AcquaintanceBuild:
    """Sample the acquaintance edge set E_A, disjoint from E_H.

    Each non-household pair enters independently with probability
    min(1, C·w); C is calibrated so the expected mean degree equals
    ``kappa``. ``method`` is "exact" (chunked over all pairs), "cells"
    (aggregation by (tile, age group) cell pairs), or "auto".
    """
    if kappa <= 0:
        raise ConfigurationError("target mean acquaintance degree must be positive")
    s = validate_mixing_matrix(s)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = population.n
    if method == "auto":
        method = "exact" if n <= exact_limit else "cells"
    if method == "exact":
        return _build_exact(population, fitness, s, kappa, households, rng, tol)
    if method == "cells":
        return _build_cells(population, fitness, s, kappa, households, rng,
                            cell_exact_pairs, tol)
    raise ConfigurationError(f"unknown acquaintance method {method!r}")


def _build_exact(population, fitness, s, kappa, households, rng, tol) -> AcquaintanceBuild:
    n = population.n
    dist_inv = 1.0 / population.territory.distance_matrix()
    target = kappa * n / 2.0
    hh_u = households.edges[:, 0] if households.edges.size else np.empty(0, dtype=np.int64)
    hh_v = households.edges[:, 1] if households.edges.size else np.empty(0, dtype=np.int64)

    chunk = max(1, min(n, 2**22 // max(n, 1) + 1))

    def iter_chunks():
        for i0 in range(0, n, chunk):
            i1 = min(n, i0 + chunk)
            rows = np.arange(i0, i1)
            w = (s[population.age[rows]][:, population.age]
                 * dist_inv[population.tile[rows]][:, population.tile]
                 * fitness[rows, None] * fitness[None, :])
            # keep strictly upper-triangular entries, drop household pairs
            cols = np.arange(n)
            w[cols[None, :] <= rows[:, None]] = 0.0
            in_chunk = (hh_u >= i0) & (hh_u < i1)
            w[hh_u[in_chunk] - i0, hh_v[in_chunk]] = 0.0
            yield rows, w

    total = 0.0
    wmax = 0.0
    n_positive = 0
    for _, w in iter_chunks():
        total += w.sum()
        wmax = max(wmax, w.max(initial=0.0))
        n_positive += int((w > 0).sum())
    if total <= 0:
        raise ConfigurationError("all pair weights are zero; cannot calibrate")
    if target >= n_positive:
        raise ConfigurationError(
            "target mean degree infeasible: at most "
            f"kappa={2.0 * n_positive / population.n:.4g} achievable")

    c = target / total
    if c * wmax >= 1.0:
        # cap binds: gather the offending weights once and solve exactly
        big = []
        small_mass = 0.0
        thresh = 1.0 / (10.0 * c)  # anything that could ever cap across iterations
        for _, w in iter_chunks():
            sel = w >= thresh
            big.append(w[sel])
            small_mass += w[~sel].sum()
        bigw = np.concatenate(big) if big else np.empty(0)
        cc = c
        for _ in range(200):
            capped = cc * bigw >= 1.0
            uncapped_mass = small_mass + bigw[~capped].sum()
            if uncapped_mass <= 0:
                raise ConfigurationError(
                    f"target mean degree infeasible: at most kappa={2.0 * capped.sum() / population.n:.4g} achievable")
            cc_new = (target - capped.sum()) / uncapped_mass
            if cc_new <= 0:
                raise ConfigurationError("target mean degree infeasible under the psi<=1 cap")
            if abs(cc_new - cc) / cc < tol:
                cc = cc_new
                break
            cc = cc_new
        c = cc

    expected = 0.0
    edges_u, edges_v = [], []
    for rows, w in iter_chunks():
        psi = np.minimum(1.0, c * w)
        expected += psi.sum()
        hit = rng.random(psi.shape) < psi
        r, cidx = np.nonzero(hit)
        edges_u.append(rows[r])
        edges_v.append(cidx)
    e_a = np.column_stack([np.concatenate(edges_u), np.concatenate(edges_v)]).astype(np.int64)
    return AcquaintanceBuild(edges=e_a, normalization=c, target_kappa=kappa,
                             expected_kappa=2.0 * expected / n)


def _build_cells(population, fitness, s, kappa, households, rng,
                 cell_exact_pairs, tol) -> AcquaintanceBuild:
    n = population.n
    dist_inv = 1.0 / population.territory.distance_matrix()
    target = kappa * n / 2.0

    cell_key = population.tile.astype(np.int64) * N_AGE_GROUPS + population.age
    uniq, inverse = np.unique(cell_key, return_inverse=True)
    n_cells = uniq.size
    cell_tile = (uniq // N_AGE_GROUPS).astype(np.int64)
    cell_age = (uniq % N_AGE_GROUPS).astype(np.int64)
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse, minlength=n_cells)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    members = [order[offsets[i]:offsets[i + 1]] for i in range(n_cells)]
    f_sum = np.array([fitness[m].sum() for m in members])
    f_sq = np.array([(fitness[m] ** 2).sum() for m in members])

    factor = s[cell_age][:, cell_age] * dist_inv[cell_tile][:, cell_tile]
    mass = factor * np.outer(f_sum, f_sum)
    np.fill_diagonal(mass, np.diagonal(factor) * (f_sum ** 2 - f_sq) / 2.0)
    mass = np.triu(mass)

    # remove household pairs from the cell-pair mass and index them for rejection
    hh_by_cp: dict[tuple[int, int], set[int]] = {}
    if households.edges.size:
        hu, hv = households.edges[:, 0], households.edges[:, 1]
        cu, cv = inverse[hu], inverse[hv]
        lo, hi = np.minimum(cu, cv), np.maximum(cu, cv)
        np.subtract.at(mass, (lo, hi), factor[lo, hi] * fitness[hu] * fitness[hv])
        keys = _pack(hu, hv, n)
        for a, b, k in zip(lo.tolist(), hi.tolist(), keys.tolist()):
            hh_by_cp.setdefault((a, b), set()).add(k)
    mass = np.maximum(mass, 0.0)

    total = mass.sum()
    if total <= 0:
        raise ConfigurationError("all pair weights are zero; cannot calibrate")
    c = target / total
    fmax = np.array([fitness[m].max() for m in members])
    wmax = (factor * np.outer(fmax, fmax)).max()
    if c * wmax >= 1.0:
        log.warning("psi cap may bind on the cell path (C*wmax=%.3g); expected-degree "
                    "calibration is approximate for capped pairs", c * wmax)

    ci, cj = np.nonzero(mass > 0)
    lam = c * mass[ci, cj]
    edges_u, edges_v = [], []
    draws = rng.poisson(lam)
    pair_counts = np.where(ci != cj, counts[ci] * counts[cj],
                           counts[ci] * (counts[ci] - 1) // 2)
    for idx in np.nonzero((draws > 0) | (pair_counts <= cell_exact_pairs))[0]:
        a, b = int(ci[idx]), int(cj[idx])
        ma, mb = members[a], members[b]
        n_pairs = ma.size * mb.size if a != b else ma.size * (ma.size - 1) // 2
        hh_keys = hh_by_cp.get((a, b), ())
        if n_pairs - len(hh_keys) <= 0:
            continue
        if n_pairs <= cell_exact_pairs:
            if a != b:
                uu, vv = np.meshgrid(ma, mb, indexing="ij")
                uu, vv = uu.ravel(), vv.ravel()
            else:
                iu, iv = np.triu_indices(ma.size, 1)
                uu, vv = ma[iu], ma[iv]
            w = factor[a, b] * fitness[uu] * fitness[vv]
            if hh_keys:
                keys = _pack(uu, vv, n)
                keep = ~np.isin(keys, np.fromiter(hh_keys, dtype=np.int64))
                uu, vv, w = uu[keep], vv[keep], w[keep]
            hit = rng.random(w.size) < np.minimum(1.0, c * w)
            edges_u.append(uu[hit])
            edges_v.append(vv[hit])
        else:
            k = int(draws[idx])
            if k == 0:
                continue
            seen: set[int] = set()
            got_u, got_v = [], []
            alias_a = AliasSampler(fitness[ma])
            alias_b = alias_a if a == b else AliasSampler(fitness[mb])
            tries = 0
            while len(got_u) < k and tries < 100 * k + 100:
                m = k - len(got_u)
                uu = ma[alias_a.sample(rng, m)]
                vv = (mb if a != b else ma)[alias_b.sample(rng, m)]
                keys = _pack(uu, vv, n)
                ok = uu != vv
                for i in np.nonzero(ok)[0]:
                    kk = int(keys[i])
                    if kk in seen or kk in hh_keys:
                        continue
                    seen.add(kk)
                    got_u.append(min(uu[i], vv[i]))
                    got_v.append(max(uu[i], vv[i]))
                    if len(got_u) == k:
                        break
                tries += m
            edges_u.append(np.array(got_u, dtype=np.int64))
            edges_v.append(np.array(got_v, dtype=np.int64))

    if edges_u:
        u = np.concatenate(edges_u)
        v = np.concatenate(edges_v)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        e_a = np.column_stack([lo, hi]).astype(np.int64)
    else:
        e_a = np.empty((0, 2), dtype=np.int64)
    return AcquaintanceBuild(edges=e_a, normalization=c, target_kappa=kappa,
                             expected_kappa=2.0 * min(target, total * c) / n)


# ---------------------------------------------------------------------------
# Graph assembly and degree statistics
# ---------------------------------------------------------------------------

@dataclass
class SocialGraph:
    """Two-layer social network over a population. Treated as immutable."""

    population: Population
    fitness: np.ndarray
    households: Households
    e_h: np.ndarray
    e_a: np.ndarray
    acq_normalization: float = float("nan")

    @property
    def n(self) -> int:
        return self.population.n

    @property
    def m_h(self) -> int:
        return self.e_h.shape[0]

    @property
    def m_a(self) -> int:
        return self.e_a.shape[0]

    @property
    def m_total(self) -> int:
        return self.m_h + self.m_a

    def degrees(self, layer: str = "all") -> np.ndarray:
        edges = {"all": np.vstack([self.e_h, self.e_a]),
                 "household": self.e_h, "acquaintance": self.e_a}[layer]
        return degrees_from_edges(self.n, edges)


def build_social_graph(population: Population, s: np.ndarray,
                       size_distribution: dict[int, float], kappa: float,
                       seed: int, method: str = "auto") -> SocialGraph:
    """Full network construction: households, fitness, acquaintances."""
    rng_h = np.random.SeedSequence(entropy=seed, spawn_key=(0,))
    rng_f = np.random.SeedSequence(entropy=seed, spawn_key=(1,))
    rng_a = np.random.SeedSequence(entropy=seed, spawn_key=(2,))
    households = build_households(population, size_distribution, np.random.default_rng(rng_h))
    fitness = sample_fitness(population.n, np.random.default_rng(rng_f))
    acq = build_acquaintances(population, fitness, s, kappa, households,
                              np.random.default_rng(rng_a), method=method)
    return SocialGraph(population=population, fitness=fitness, households=households,
                       e_h=households.edges, e_a=acq.edges,
                       acq_normalization=acq.normalization)


def degrees_from_edges(n: int, *edge_sets: np.ndarray) -> np.ndarray:
    deg = np.zeros(n, dtype=np.int64)
    for e in edge_sets:
        if e.size:
            deg += np.bincount(e[:, 0], minlength=n)
            deg += np.bincount(e[:, 1], minlength=n)
    return deg


@dataclass
class DegreeStats:
    histogram: np.ndarray  # counts indexed by degree
    mean: float
    second_moment: float


def degree_stats(degrees: np.ndarray) -> DegreeStats:
    """Exact degree histogram plus first and second moments."""
    degrees = np.asarray(degrees)
    hist = np.bincount(degrees)
    return DegreeStats(histogram=hist, mean=float(degrees.mean()),
                       second_moment=float((degrees.astype(float) ** 2).mean()))
