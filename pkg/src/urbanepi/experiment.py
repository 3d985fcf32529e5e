"""Experiment orchestration: TOML configs, configuration sweeps, threshold
scans, placement studies, and tidy CSV output with a JSON manifest."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import data, metrics
from .contacts import Configuration, calibrate_beta, index_case_secondary_events, make_kernel
from .epidemic import EpidemicParams, outbreak_filter, run_ensemble
from .errors import ConfigurationError, InputError
from .network import SocialGraph, build_social_graph
from .population import (AGE_GROUP_NAMES, CsvGridDensity, Population, RadialDensity,
                         Territory, UniformDensity, build_grid, populate)
from .rngtools import child_seed, substream

log = logging.getLogger(__name__)

PLACEMENT_MODES = ("random", "central", "peripheral")


@dataclass
class ScanSpec:
    beta_min: float
    beta_max: float
    beta_step: float
    replicas: int = 50

    def grid(self) -> np.ndarray:
        n = int(round((self.beta_max - self.beta_min) / self.beta_step)) + 1
        return self.beta_min + self.beta_step * np.arange(n)


@dataclass
class ExperimentConfig:
    # territory
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 6000.0, 6000.0)
    tile_side: float = 1000.0
    density: str = "radial"          # "uniform", "radial", or a CSV path
    total_population: float = 5000.0
    radial_scale: float = 2500.0
    radial_center: tuple[float, float] | None = None
    min_tile_population: int = 10
    # population / network
    age_distribution: tuple = data.DEFAULT_AGE_DISTRIBUTION
    household_sizes: dict = field(default_factory=lambda: dict(data.DEFAULT_HOUSEHOLD_SIZES))
    mixing_matrix: list = field(default_factory=lambda: [list(r) for r in data.DEFAULT_MIXING_MATRIX])
    kappa: float = data.DEFAULT_KAPPA
    network_method: str = "auto"
    # epidemic
    configurations: tuple = tuple(c.value for c in Configuration)
    r0: float = data.DEFAULT_R0
    mu: float = data.DEFAULT_MU
    beta: float | None = None        # overrides calibration when set
    replicas: int = 100
    max_days: int = 365
    index_mode: str = "uniform"
    index_tile: int | None = None
    # scan / execution
    scan: ScanSpec | None = None
    seed: int = 1
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        for name in self.configurations:
            Configuration(name)  # raises ValueError on unknown names

    def density_model(self):
        if self.density == "uniform":
            return UniformDensity(self.total_population)
        if self.density == "radial":
            return RadialDensity(self.total_population, self.radial_scale,
                                 self.radial_center)
        path = Path(self.density)
        if not path.exists():
            raise InputError(f"density grid file not found: {path}")
        return CsvGridDensity(str(path))

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "scan"}
        d["scan"] = None if self.scan is None else self.scan.__dict__
        return json.loads(json.dumps(d, default=list))


_SECTION_KEYS = {
    "territory": {"bbox": "bbox", "tile_side": "tile_side", "density": "density",
                  "total_population": "total_population", "radial_scale": "radial_scale",
                  "radial_center": "radial_center",
                  "min_tile_population": "min_tile_population"},
    "population": {"age_distribution": "age_distribution"},
    "network": {"kappa": "kappa", "household_sizes": "household_sizes",
                "mixing_matrix": "mixing_matrix", "method": "network_method"},
    "epidemic": {"configurations": "configurations", "r0": "r0", "mu": "mu",
                 "beta": "beta", "replicas": "replicas", "max_days": "max_days",
                 "index_mode": "index_mode", "index_tile": "index_tile"},
    "output": {"directory": "output_dir"},
}


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a TOML experiment file; unknown keys raise a descriptive error."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    kwargs: dict = {}
    for section, mapping in _SECTION_KEYS.items():
        body = raw.pop(section, {})
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in mapping:
                raise ConfigurationError(f"unknown key '{key}' in [{section}]")
            kwargs[mapping[key]] = value
    scan = raw.pop("scan", None)
    if scan is not None:
        try:
            kwargs["scan"] = ScanSpec(**scan)
        except TypeError as exc:
            raise ConfigurationError(f"invalid [scan] section: {exc}") from None
    for key in ("seed", "workers"):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if raw:
        raise ConfigurationError(f"unknown top-level keys: {sorted(raw)}")
    if "household_sizes" in kwargs:
        kwargs["household_sizes"] = {int(k): float(v)
                                     for k, v in kwargs["household_sizes"].items()}
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


# ---------------------------------------------------------------------------
# Asset building and serialization
# ---------------------------------------------------------------------------

@dataclass
class Assets:
    territory: Territory
    population: Population
    graph: SocialGraph


def build_assets(cfg: ExperimentConfig) -> Assets:
    territory = build_grid(cfg.bbox, cfg.tile_side, cfg.density_model(),
                           min_pop=cfg.min_tile_population)
    population = populate(territory, cfg.age_distribution,
                          substream(cfg.seed, 0))
    graph = build_social_graph(population, np.asarray(cfg.mixing_matrix, dtype=float),
                               cfg.household_sizes, cfg.kappa,
                               seed=child_seed(cfg.seed, 1), method=cfg.network_method)
    return Assets(territory=territory, population=population, graph=graph)


def write_assets(assets: Assets, out: Path) -> list[str]:
    """Agent, edge, and territory tables; returns the written file names."""
    out.mkdir(parents=True, exist_ok=True)
    pop, g, terr = assets.population, assets.graph, assets.territory

    household = np.full(pop.n, -1, dtype=np.int64)
    for hid, members in enumerate(g.households.members):
        household[members] = hid
    agents = pd.DataFrame({"id": np.arange(pop.n), "tile": pop.tile,
                           "age_group": pop.age, "fitness": g.fitness,
                           "household": household})
    edges = pd.DataFrame({
        "u": np.concatenate([g.e_h[:, 0], g.e_a[:, 0]]),
        "v": np.concatenate([g.e_h[:, 1], g.e_a[:, 1]]),
        "layer": ["H"] * len(g.e_h) + ["A"] * len(g.e_a),
    })
    tiles = pd.DataFrame({"tile": np.arange(terr.n_tiles), "row": terr.tile_row,
                          "col": terr.tile_col,
                          "population": terr.tile_population})
    files = {"agents.csv": agents, "edges.csv": edges, "territory.csv": tiles}
    for name, frame in files.items():
        frame.to_csv(out / name, index=False)
    return sorted(files)


def _tidy(path: Path, rows: list[tuple]) -> None:
    cols = ("config", "replica", "t_or_bin", "value")
    if rows and len(rows[0]) == 5:
        cols = ("config", "replica", "replica_b", "t_or_bin", "value")
    pd.DataFrame(rows, columns=cols).to_csv(path, index=False)


def _tidy_grouped(path: Path, rows: list[tuple]) -> None:
    pd.DataFrame(rows, columns=("config", "replica", "group", "t_or_bin", "value")
                 ).to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

class Manifest:
    """Incrementally written experiment record: config echo, seeds, per-stage
    parameters, and the file inventory. Flushed after every stage so partial
    failures leave a record of what completed."""

    def __init__(self, out: Path, cfg: ExperimentConfig):
        self.path = out / "manifest.json"
        self.doc = {"config": cfg.as_dict(), "master_seed": cfg.seed,
                    "stages": [], "network": {}, "configurations": {},
                    "thresholds": {}, "placements": {}, "files": []}
        self.flush()

    def stage(self, name: str, **info):
        self.doc["stages"].append(name)
        if info:
            self.doc[name] = {**self.doc.get(name, {}), **info}
        self.flush()

    def add_files(self, names):
        self.doc["files"] = sorted(set(self.doc["files"]) | set(names))

    def flush(self):
        self.path.write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Experiment stages
# ---------------------------------------------------------------------------

def _config_params(cfg: ExperimentConfig, kernel) -> tuple[float, EpidemicParams]:
    beta = cfg.beta if cfg.beta is not None else calibrate_beta(kernel, cfg.r0, cfg.mu)
    params = EpidemicParams(beta=beta, mu=cfg.mu, max_days=cfg.max_days,
                            index_mode=cfg.index_mode, index_tile=cfg.index_tile)
    return beta, params


def run_experiment(cfg: ExperimentConfig | str | Path,
                   emit_contact_log: bool = False) -> Path:
    """Build one population and network instance, then run every requested
    configuration against it, writing metric CSVs and the manifest."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, cfg)

    assets = build_assets(cfg)
    asset_files = write_assets(assets, out)
    manifest.add_files(asset_files)
    manifest.doc["network"] = {
        "n_agents": assets.population.n,
        "n_tiles": assets.territory.n_tiles,
        "m_household": assets.graph.m_h, "m_acquaintance": assets.graph.m_a,
        "m_total": assets.graph.m_total,
        "realized_kappa": 2 * assets.graph.m_a / assets.population.n,
        "acq_normalization": assets.graph.acq_normalization,
    }
    manifest.stage("build")

    infected, recovered, attack, r0_rows, r_t = [], [], [], [], []
    tau_rows, ent_rows, theta_rows = [], [], []
    tile_rows: dict[str, list] = {"tile_first_infection": [], "tile_to_peak": [],
                                  "tile_attack_rate": []}
    age_inf_rows, age_r_rows, deg_rows = [], [], []

    for ci, name in enumerate(cfg.configurations):
        kernel = make_kernel(Configuration(name), assets.graph,
                             s=np.asarray(cfg.mixing_matrix, dtype=float))
        beta, params = _config_params(cfg, kernel)
        results = run_ensemble(kernel, params, cfg.replicas,
                               master_seed=child_seed(cfg.seed, 2, ci),
                               workers=cfg.workers)
        outbreaks, _ = outbreak_filter(results)
        if emit_contact_log:
            _write_contact_log(kernel, params, cfg, ci, out, name)

        for res in results:
            attack.append((name, res.replica, 0, res.attack_rate))
            r0_rows.append((name, res.replica, 0,
                            int((res.infector == res.index_case).sum())))
        for res in outbreaks:
            t = np.arange(res.days)
            infected.extend(zip([name] * res.days, [res.replica] * res.days,
                                t, res.i / res.n))
            recovered.extend(zip([name] * res.days, [res.replica] * res.days,
                                 t, res.r / res.n))
            geo = metrics.geo_series(res, assets.territory)
            tau_rows.extend(zip([name] * res.days, [res.replica] * res.days,
                                t, geo.tau))
            ent_rows.extend(zip([name] * res.days, [res.replica] * res.days,
                                t, geo.entropy))
        if outbreaks:
            rep = metrics.reproduction_number(outbreaks)
            r_t.extend((name, -1, int(day), val) for day, val in zip(rep.t, rep.r))
            theta_rows.extend(_overlap_rows(name, outbreaks, assets.territory))
            ts = metrics.tile_stats(outbreaks, assets.territory)
            for j in range(assets.territory.n_tiles):
                tile_rows["tile_first_infection"].append((name, -1, j, ts.first_infection[j]))
                tile_rows["tile_to_peak"].append((name, -1, j, ts.to_peak[j]))
                tile_rows["tile_attack_rate"].append((name, -1, j, ts.attack_rate[j]))
            ages = metrics.age_series(outbreaks)
            for gi, gname in enumerate(AGE_GROUP_NAMES):
                age_inf_rows.extend((name, -1, gname, int(o), v) for o, v in
                                    zip(ages.offsets, ages.infected[:, gi]))
                age_r_rows.extend((name, -1, gname, int(o), v) for o, v in
                                  zip(ages.offsets, ages.r_by_age[:, gi]))
        stats = metrics.degree_distribution_of_contacts(
            kernel, 10, substream(cfg.seed, 3, ci))
        deg_rows.extend((name, -1, d, int(c)) for d, c in
                        enumerate(stats.histogram) if c > 0)
        r0_mean, r0_err = index_case_secondary_events(
            kernel, beta, cfg.mu, 10_000, child_seed(cfg.seed, 4, ci))
        manifest.doc["configurations"][name] = {
            "beta": beta, "mu": cfg.mu, "replicas": cfg.replicas,
            "n_outbreaks": len(outbreaks),
            "r0_index_mc": r0_mean, "r0_index_stderr": r0_err,
            "contact_degree_mean": stats.mean,
            "contact_degree_second_moment": stats.second_moment,
        }
        manifest.stage(f"config:{name}")

    tables = {"infected.csv": infected, "recovered.csv": recovered,
              "attack_rate.csv": attack, "r0_index.csv": r0_rows,
              "r_t.csv": r_t, "tau.csv": tau_rows, "entropy.csv": ent_rows,
              "overlap.csv": theta_rows, "contact_degree.csv": deg_rows}
    tables.update({f"{k}.csv": v for k, v in tile_rows.items()})
    for fname, rows in tables.items():
        _tidy(out / fname, rows)
    _tidy_grouped(out / "age_infected.csv", age_inf_rows)
    _tidy_grouped(out / "age_r.csv", age_r_rows)
    manifest.add_files(sorted(tables) + ["age_infected.csv", "age_r.csv"])

    if cfg.scan is not None:
        scan_experiment(cfg, assets, manifest)
    manifest.stage("done")
    return out


def _overlap_rows(name: str, outbreaks, territory, max_runs: int = 40):
    """Per-pair overlap on the peak-normalized grid, capped to keep output
    size bounded."""
    rows = []
    runs = outbreaks[:max_runs]
    geos = []
    for res in runs:
        try:
            geos.append((res.replica,
                         metrics.normalize_geo(metrics.geo_series(res, territory), res)))
        except ConfigurationError:
            continue
    for i in range(len(geos)):
        for j in range(i + 1, len(geos)):
            theta = metrics.overlap(geos[i][1], geos[j][1])
            rows.extend((name, geos[i][0], geos[j][0], float(x), v)
                        for x, v in zip(theta.x, theta.theta))
    return rows


def _write_contact_log(kernel, params, cfg, ci, out: Path, name: str) -> None:
    """One replica rerun with contact recording; emits (day, u, v, layer)."""
    from .epidemic import run
    res = run(kernel, params, substream(cfg.seed, 2, ci, 0), replica=0,
              record_contacts=True)
    labels = np.array(["H", "A", "F"])
    frames = []
    for day, cs in enumerate(res.contact_log):
        if len(cs.pairs):
            frames.append(pd.DataFrame({"day": day, "u": cs.pairs[:, 0],
                                        "v": cs.pairs[:, 1],
                                        "layer": labels[cs.layer]}))
    log_frame = (pd.concat(frames, ignore_index=True) if frames
                 else pd.DataFrame(columns=["day", "u", "v", "layer"]))
    log_frame.to_csv(out / f"contacts_{name}.csv", index=False)


def scan_experiment(cfg: ExperimentConfig, assets: Assets | None = None,
                    manifest: Manifest | None = None) -> Path:
    """Threshold scan per configuration: Delta(beta) curves plus the argmax
    and HMF threshold estimates recorded in the manifest."""
    if cfg.scan is None:
        raise ConfigurationError("config has no [scan] section")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if assets is None:
        assets = build_assets(cfg)
    if manifest is None:
        manifest = Manifest(out, cfg)
    grid = cfg.scan.grid()
    delta_rows, rho_rows = [], []
    for ci, name in enumerate(cfg.configurations):
        kernel = make_kernel(Configuration(name), assets.graph,
                             s=np.asarray(cfg.mixing_matrix, dtype=float))
        scan = metrics.threshold_scan(kernel, cfg.mu, grid, cfg.scan.replicas,
                                      master_seed=child_seed(cfg.seed, 5, ci),
                                      workers=cfg.workers, max_days=cfg.max_days)
        delta_rows.extend((name, -1, float(b), d)
                          for b, d in zip(scan.beta_grid, scan.delta))
        for b, rhos in zip(scan.beta_grid, scan.rho_samples):
            rho_rows.extend((name, r, float(b), rho) for r, rho in enumerate(rhos))
        manifest.doc["thresholds"][name] = {"beta_c_delta": scan.beta_c_delta,
                                            "beta_c_hmf": scan.beta_c_hmf}
        manifest.stage(f"scan:{name}")
    _tidy(out / "delta.csv", delta_rows)
    _tidy(out / "scan_attack_rate.csv", rho_rows)
    manifest.add_files(["delta.csv", "scan_attack_rate.csv"])
    manifest.flush()
    return out


def resolve_placement_tile(territory: Territory, mode: str,
                           override: int | None = None) -> int | None:
    """random -> None (uniform over agents); central -> max-population tile;
    peripheral -> retained tile farthest from the population centroid."""
    if override is not None:
        if override < 0 or override >= territory.n_tiles:
            raise ConfigurationError(f"tile id {override} not retained")
        return override
    if mode == "random":
        return None
    if mode == "central":
        return int(np.argmax(territory.tile_population))
    if mode == "peripheral":
        w = territory.tile_population / territory.tile_population.sum()
        centroid = (w[:, None] * territory.centers).sum(axis=0)
        return int(np.argmax(np.linalg.norm(territory.centers - centroid, axis=1)))
    raise ConfigurationError(f"unknown placement mode '{mode}'")


def placement_study(cfg: ExperimentConfig | str | Path,
                    modes=PLACEMENT_MODES,
                    overrides: dict[str, int] | None = None) -> Path:
    """Repeat the ensemble per index-case placement mode; emits tau, entropy,
    and overlap series per mode under <out>/place_<mode>/."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    overrides = overrides or {}
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, cfg)
    assets = build_assets(cfg)
    manifest.stage("build", n_agents=assets.population.n)

    for mi, mode in enumerate(modes):
        tile = resolve_placement_tile(assets.territory, mode, overrides.get(mode))
        mode_dir = out / f"place_{mode}"
        mode_dir.mkdir(exist_ok=True)
        tau_rows, ent_rows, theta_rows = [], [], []
        for ci, name in enumerate(cfg.configurations):
            kernel = make_kernel(Configuration(name), assets.graph,
                                 s=np.asarray(cfg.mixing_matrix, dtype=float))
            beta, params = _config_params(cfg, kernel)
            params = EpidemicParams(beta=beta, mu=cfg.mu, max_days=cfg.max_days,
                                    index_mode="uniform" if tile is None else "tile",
                                    index_tile=tile)
            results = run_ensemble(kernel, params, cfg.replicas,
                                   master_seed=child_seed(cfg.seed, 6, mi, ci),
                                   workers=cfg.workers)
            outbreaks, _ = outbreak_filter(results)
            for res in outbreaks:
                t = np.arange(res.days)
                geo = metrics.geo_series(res, assets.territory)
                tau_rows.extend(zip([name] * res.days, [res.replica] * res.days,
                                    t, geo.tau))
                ent_rows.extend(zip([name] * res.days, [res.replica] * res.days,
                                    t, geo.entropy))
            theta_rows.extend(_overlap_rows(name, outbreaks, assets.territory))
        _tidy(mode_dir / "tau.csv", tau_rows)
        _tidy(mode_dir / "entropy.csv", ent_rows)
        _tidy(mode_dir / "overlap.csv", theta_rows)
        manifest.doc["placements"][mode] = {
            "tile": tile, "files": [f"place_{mode}/{f}"
                                    for f in ("tau.csv", "entropy.csv", "overlap.csv")]}
        manifest.add_files(manifest.doc["placements"][mode]["files"])
        manifest.stage(f"place:{mode}")
    manifest.stage("done")
    return out
