"""End-to-end acceptance checks for the simulator: contact-mass and
per-pair sampling correctness, configuration degeneracies, calibration,
threshold estimates, mean-field and deterministic limits, final-size
bimodality, qualitative configuration ordering, metric identities, and
byte-level reproducibility. One summary line is printed per criterion."""

import filecmp
import sys
from collections import deque

import numpy as np
import pytest
from scipy import stats

from urbanepi import metrics
from urbanepi.contacts import (Configuration, calibrate_beta,
                               index_case_secondary_events, make_kernel)
from urbanepi.data import (DEFAULT_AGE_DISTRIBUTION, DEFAULT_HOUSEHOLD_SIZES,
                           DEFAULT_MIXING_MATRIX)
from urbanepi.epidemic import (EpidemicParams, outbreak_filter, run,
                               run_ensemble)
from urbanepi.experiment import ExperimentConfig, run_experiment
from urbanepi.network import build_social_graph
from urbanepi.population import RadialDensity, build_grid, populate

from conftest import make_territory

MIX = np.asarray(DEFAULT_MIXING_MATRIX, dtype=float)
FLAT_MIX = np.full((4, 4), 3.0)
R0, MU = 1.3, 1.0 / 3.0
ALL_CONFIGS = list(Configuration)


def report(ok: bool, label: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def build_instance(n_total, seed, bbox=(0.0, 0.0, 6000.0, 6000.0),
                   scale=2200.0, kappa=8.0):
    terr = build_grid(bbox, 1000.0, RadialDensity(n_total, scale))
    pop = populate(terr, DEFAULT_AGE_DISTRIBUTION, seed=seed)
    return build_social_graph(pop, MIX, DEFAULT_HOUSEHOLD_SIZES, kappa,
                              seed=seed)


@pytest.fixture(scope="module")
def city_instances():
    """Five independent population/network realizations, ~10k agents."""
    return [build_instance(10_000, seed) for seed in range(300, 305)]


@pytest.fixture(scope="module")
def town_instances():
    """Five small realizations (~2k agents) for threshold scans."""
    return [build_instance(2_000, seed) for seed in range(400, 405)]


@pytest.fixture(scope="module")
def mid_graph():
    """Single ~3k-agent instance for scan and histogram checks."""
    return build_instance(3_000, 500)


# ---------------------------------------------------------------------------
# Contact kernels
# ---------------------------------------------------------------------------

def test_mass_normalization(toy_graph, desk_graph, mid_graph):
    """Analytic daily contact mass equals |E| on every configuration of
    three distinct networks."""
    worst = 0.0
    for g in (toy_graph, desk_graph, mid_graph):
        for cfg in ALL_CONFIGS:
            k = make_kernel(cfg, g, s=MIX)
            rel = abs(k.analytic_total_mass() - g.m_total) / g.m_total
            worst = max(worst, rel)
    report(worst <= 1e-9, f"contact mass == |E| on 3 networks x 6 "
                          f"configurations (worst rel err {worst:.2e})")


def test_toy_pair_frequencies(toy_graph):
    """Per-pair contact frequencies over 1e5 sampled days match the
    analytic probabilities (chi-square p > 0.01 per configuration)."""
    n = toy_graph.n
    days = 100_000
    iu, iv = np.triu_indices(n, k=1)
    key = iu.astype(np.int64) * n + iv
    order = np.argsort(key)
    skey = key[order]
    worst_p = 1.0
    for cfg in ALL_CONFIGS:
        k = make_kernel(cfg, toy_graph, s=MIX)
        p = np.array([k.pair_probability(int(u), int(v))
                      for u, v in zip(iu, iv)])
        rng = np.random.default_rng(2024)
        counts = np.zeros(p.size, dtype=np.int64)
        for t in range(days):
            pairs = k.sample_day(t, rng).pairs
            kk = pairs[:, 0].astype(np.int64) * n + pairs[:, 1]
            counts[order[np.searchsorted(skey, kk)]] += 1
        assert counts[p == 0].sum() == 0          # impossible pairs absent
        assert np.all(counts[p == 1] == days)     # certain pairs every day
        expected = days * p
        use = (expected >= 5) & (days - expected >= 5)
        if use.any():
            var = expected[use] * (1 - p[use])
            chi = (((counts[use] - expected[use]) ** 2) / var).sum()
            worst_p = min(worst_p, stats.chi2.sf(chi, df=int(use.sum())))
    report(worst_p > 0.01,
           f"toy per-pair frequencies over 1e5 days (min p {worst_p:.3f})")


def test_degeneracy_reductions(mixing):
    """DN == HN and ADN == AN on one tile; AN == HN under constant mixing."""
    terr = make_territory([60])
    pop = populate(terr, DEFAULT_AGE_DISTRIBUTION, seed=21)
    g = build_social_graph(pop, mixing, DEFAULT_HOUSEHOLD_SIZES, 5.0, seed=21)
    iu, iv = np.triu_indices(g.n, k=1)

    def pvec(cfg, graph, s):
        k = make_kernel(cfg, graph, s=s)
        return np.array([k.pair_probability(int(u), int(v))
                         for u, v in zip(iu, iv)])

    worst = max(
        np.abs(pvec(Configuration.DN, g, mixing)
               - pvec(Configuration.HN, g, mixing)).max(),
        np.abs(pvec(Configuration.ADN, g, mixing)
               - pvec(Configuration.AN, g, mixing)).max(),
    )

    terr2 = make_territory([20, 20, 20])
    pop2 = populate(terr2, DEFAULT_AGE_DISTRIBUTION, seed=22)
    g2 = build_social_graph(pop2, FLAT_MIX, DEFAULT_HOUSEHOLD_SIZES, 5.0,
                            seed=22)
    iu, iv = np.triu_indices(g2.n, k=1)
    worst = max(worst, np.abs(pvec(Configuration.AN, g2, FLAT_MIX)
                              - pvec(Configuration.HN, g2, FLAT_MIX)).max())
    report(worst <= 1e-12,
           f"degeneracy reductions DN==HN, ADN==AN, AN==HN (max dev {worst:.1e})")


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def test_calibration_identity():
    """With the mean contact mass tuned to ~9.94, beta lands in
    [0.0433, 0.0439] and the Monte-Carlo index-case mean equals R0."""
    target_mass = 9.94
    kappa = 8.0
    graph = None
    for _ in range(4):
        graph = build_instance(5_000, 510, kappa=kappa)
        mean_mass = make_kernel(Configuration.SN, graph).expected_contacts_per_agent()
        if 9.90 <= mean_mass <= 9.98:
            break
        kappa += target_mass - mean_mass
    assert 9.90 <= mean_mass <= 9.98, f"mass tuning failed: {mean_mass}"

    betas, mc_ok = [], True
    for cfg in (Configuration.SN, Configuration.HN, Configuration.ADN):
        k = make_kernel(cfg, graph, s=MIX)
        beta = calibrate_beta(k, R0, MU)
        betas.append(beta)
        mean, err = index_case_secondary_events(k, beta, MU, 20_000, seed=33)
        mc_ok = mc_ok and abs(mean - R0) <= 3 * err
    beta_ok = all(0.0433 <= b <= 0.0439 for b in betas)
    report(beta_ok and mc_ok,
           f"calibration: beta {betas[0]:.5f} in [0.0433, 0.0439]; "
           f"index-case MC mean within 3 sigma of {R0}")


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

def test_hmf_threshold(mid_graph):
    """Closed-form moment threshold matches hand values exactly; the
    variability-peak estimate lies within one grid cell of it for HM/SN."""
    hand_ok = (metrics.hmf_threshold(3.0, 10.0, mu=1.0) == 3.0 / 7.0
               and metrics.hmf_threshold(3.0, 10.0, mu=0.5) == 1.5 / 7.0)
    step = 0.005
    grid = np.arange(0.020, 0.0551, step)
    gaps = {}
    for cfg in (Configuration.HM, Configuration.SN):
        k = make_kernel(cfg, mid_graph, s=MIX)
        scan = metrics.threshold_scan(k, MU, grid, replicas_per_beta=50,
                                      master_seed=600, workers=4)
        gaps[cfg.value] = abs(scan.beta_c_delta - scan.beta_c_hmf)
    within = all(gap <= step + 1e-12 for gap in gaps.values())
    report(hand_ok and within,
           "variability peak within one grid cell of the moment threshold "
           f"(gaps HM {gaps['HM']:.4f}, SN {gaps['SN']:.4f}, cell {step})")


# ---------------------------------------------------------------------------
# Epidemic limits
# ---------------------------------------------------------------------------

def test_mean_field_crosscheck(city_instances):
    """HM outbreak ensembles reproduce the fully-mixed SIR solution."""
    g = city_instances[0]
    k = make_kernel(Configuration.HM, g)
    beta = calibrate_beta(k, R0, MU)
    results = run_ensemble(k, EpidemicParams(beta=beta, mu=MU, max_days=500),
                           100, master_seed=610, workers=4)
    outbreaks, _ = outbreak_filter(results)
    attack = float(np.mean([r.attack_rate for r in outbreaks]))
    rho_star = metrics.sir_final_size(R0)
    attack_err = abs(attack - rho_star) / rho_star

    _, mean_prev = metrics.aligned_mean_prevalence(outbreaks)
    peak = float(np.nanmax(mean_prev))
    det_peak = float(metrics.deterministic_sir(R0, MU, 1.0 / g.n, 800).max())
    peak_err = abs(peak - det_peak) / det_peak
    report(attack_err <= 0.10 and peak_err <= 0.15,
           f"mean-field cross-check: attack rel err {attack_err:.3f} (<=0.10), "
           f"peak rel err {peak_err:.3f} (<=0.15)")


def test_bimodal_final_size(mid_graph):
    """At default calibration the attack-rate histogram leaves the
    interval [0.15, 0.25] empty in at least 9 of 10 experiment seeds."""
    k = make_kernel(Configuration.SN, mid_graph)
    beta = calibrate_beta(k, R0, MU)
    clean = 0
    for seed in range(10):
        results = run_ensemble(k, EpidemicParams(beta=beta, mu=MU), 100,
                               master_seed=620 + seed, workers=4)
        rho = np.array([r.attack_rate for r in results])
        clean += int(not np.any((rho >= 0.15) & (rho <= 0.25)))
    report(clean >= 9, f"bimodal final sizes: mid-range empty in {clean}/10 seeds")


def test_deterministic_bfs_limit():
    """beta = mu = 1 on the static network infects exactly by graph distance."""
    ok = True
    for seed in (41, 42, 43, 44, 45):
        terr = make_territory([40, 30, 20], tile_side=700.0)
        pop = populate(terr, DEFAULT_AGE_DISTRIBUTION, seed=seed)
        g = build_social_graph(pop, MIX, DEFAULT_HOUSEHOLD_SIZES, 5.0, seed=seed)
        k = make_kernel(Configuration.SN, g)
        res = run(k, EpidemicParams(beta=1.0, mu=1.0), seed=seed)

        adj = [[] for _ in range(g.n)]
        for u, v in np.vstack([g.e_h, g.e_a]):
            adj[u].append(v)
            adj[v].append(u)
        depth = np.full(g.n, -1)
        depth[res.index_case] = 0
        queue = deque([res.index_case])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        ok = ok and np.array_equal(res.infection_day, depth)
    report(ok, "beta=mu=1 infection days equal BFS distance on 5 toy graphs")


# ---------------------------------------------------------------------------
# Qualitative configuration ordering
# ---------------------------------------------------------------------------

def test_configuration_ordering(city_instances, town_instances):
    """Across 5 instances: AN/SN peak earlier and spread wider than HN;
    HM is slowest and least pervasive; threshold order AN < HN <= DN."""
    names = ("HM", "SN", "AN", "HN")
    near_threshold_beta = 0.038
    peaks = {n: [] for n in names}
    attacks = {n: [] for n in names}
    for gi, g in enumerate(city_instances):
        for name in names:
            k = make_kernel(Configuration(name), g, s=MIX)
            beta = calibrate_beta(k, R0, MU)
            res = run_ensemble(k, EpidemicParams(beta=beta, mu=MU), 20,
                               master_seed=700 + 10 * gi, workers=4)
            outbreaks, _ = outbreak_filter(res)
            peaks[name].append(np.mean([r.peak_day for r in outbreaks]))
            res = run_ensemble(k, EpidemicParams(beta=near_threshold_beta, mu=MU),
                               20, master_seed=705 + 10 * gi, workers=4)
            attacks[name].append(np.mean([r.attack_rate for r in res]))
    peak = {n: float(np.mean(v)) for n, v in peaks.items()}
    att = {n: float(np.mean(v)) for n, v in attacks.items()}
    speed_ok = (peak["AN"] < peak["HN"] and peak["SN"] < peak["HN"]
                and all(peak["HM"] > peak[n] for n in ("SN", "AN", "HN")))
    spread_ok = (att["AN"] > att["HN"] and att["SN"] > att["HN"]
                 and all(att["HM"] < att[n] for n in ("SN", "AN", "HN")))

    grid = np.arange(0.020, 0.05501, 0.0025)
    bc = {}
    for name in ("AN", "HN", "DN"):
        pooled = [[] for _ in grid]
        for gi, g in enumerate(town_instances):
            k = make_kernel(Configuration(name), g, s=MIX)
            scan = metrics.threshold_scan(k, MU, grid, replicas_per_beta=20,
                                          master_seed=800 + 10 * gi, workers=4)
            for bi, rho in enumerate(scan.rho_samples):
                pooled[bi].extend(rho)
        delta = [metrics.epidemic_variability(np.array(r)) for r in pooled]
        bc[name] = float(grid[int(np.nanargmax(delta))])
    threshold_ok = bc["AN"] < bc["HN"] <= bc["DN"]
    report(speed_ok and spread_ok and threshold_ok,
           "configuration ordering: peaks "
           + ", ".join(f"{n} {peak[n]:.0f}" for n in names)
           + "; attack " + ", ".join(f"{n} {att[n]:.3f}" for n in names)
           + "; beta_c " + ", ".join(f"{n} {bc[n]:.4f}" for n in ("AN", "HN", "DN")))


# ---------------------------------------------------------------------------
# Metric identities and reproducibility
# ---------------------------------------------------------------------------

def test_metric_identities(desk_graph):
    """Hand-arithmetic values for the geographic metrics; self-overlap;
    exact cohort accounting of the reproduction number."""
    q = np.array([2 / 3, 1 / 3, 0.0])
    h = -np.nansum(q * np.log(np.where(q > 0, q, 1.0))) / np.log(3)
    hand_ok = (abs(h - 0.5793801643) <= 1e-9
               and abs(metrics.hellinger_affinity([1, 0], [0.5, 0.5])
                       - np.sqrt(0.5)) <= 1e-12
               and metrics.hellinger_affinity([0.3, 0.7], [0.3, 0.7])
               == pytest.approx(1.0, abs=1e-12))

    k = make_kernel(Configuration.AN, desk_graph, s=MIX)
    beta = calibrate_beta(k, 1.5, MU)
    res = run(k, EpidemicParams(beta=beta, mu=MU), seed=77)
    geo = metrics.geo_series(res, desk_graph.population.territory)
    norm = metrics.normalize_geo(geo, res)
    theta_self = metrics.overlap(norm, norm).theta
    self_ok = np.nanmax(np.abs(theta_self - 1.0)) <= 1e-12

    series = metrics.reproduction_number([res])
    cohort_ok = float((series.r * series.cohort).sum()) == float(
        (res.infection_day > 0).sum())
    report(hand_ok and self_ok and cohort_ok,
           "metric identities: entropy/affinity hand values, "
           "self-overlap == 1, cohort accounting exact")


def test_reproducibility(tmp_path):
    """Identical config and seed give byte-identical metric tables."""
    outs = []
    for tag in ("a", "b"):
        cfg = ExperimentConfig(bbox=(0, 0, 3000, 3000), total_population=600,
                               radial_scale=1200, configurations=("SN", "ADN"),
                               replicas=10, seed=99,
                               output_dir=str(tmp_path / tag), workers=2)
        outs.append(run_experiment(cfg))
    names = [p.name for p in outs[0].iterdir() if p.suffix == ".csv"]
    match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names,
                                               shallow=False)
    ok = not mismatch and not errors and len(match) == len(names)
    report(ok, f"reproducibility: {len(match)} CSVs byte-identical across reruns")
