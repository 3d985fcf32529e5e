import json

import numpy as np
import pandas as pd
import pytest

TIDY = ["config", "replica", "t_or_bin", "value"]
PAIR = ["config", "replica", "replica_b", "t_or_bin", "value"]
GROUP = ["config", "replica", "group", "t_or_bin", "value"]


def tidy(rows, columns=TIDY):
    return pd.DataFrame(rows, columns=columns)


def build_tree(base, configs=("SN", "HM"), with_scan=True, empty=False,
               theta_value=None):
    """Write a miniature but schema-complete experiment output tree."""
    base.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(5)
    days = 30
    n_tiles = 4

    def curve(peak, height):
        t = np.arange(days)
        return height * np.exp(-0.5 * ((t - peak) / 6.0) ** 2)

    files = {}
    inf, rec, tau, ent, r_t, attack, r0 = [], [], [], [], [], [], []
    theta, deg = [], []
    tile = {"tile_first_infection": [], "tile_to_peak": [],
            "tile_attack_rate": []}
    age_inf, age_r = [], []
    for c, name in enumerate(configs):
        for rep in (0, 1):
            attack.append((name, rep, 0, 0.4 + 0.01 * rep))
            r0.append((name, rep, 0, rng.integers(0, 4)))
            if empty:
                continue
            prev = curve(12 + 3 * c, 0.05 + 0.01 * rep)
            for t, v in enumerate(prev):
                inf.append((name, rep, t, v))
                rec.append((name, rep, t, min(1.0, 0.4 * t / days)))
                tau.append((name, rep, t, min(1.0, v * 15)))
                ent.append((name, rep, t, min(1.0, v * 12)))
        if not empty:
            for t in range(days):
                r_t.append((name, -1, t, max(0.0, 1.5 - 0.05 * t)))
            x = np.linspace(0, 2, 50)
            base_theta = (np.ones_like(x) if theta_value is not None
                          else np.exp(-((x - 1) ** 2)))
            for xv, tv in zip(x, base_theta):
                theta.append((name, 0, 1, float(xv),
                              theta_value if theta_value is not None
                              else float(tv)))
            for j in range(n_tiles):
                tile["tile_first_infection"].append((name, -1, j, 2.0 + j))
                tile["tile_to_peak"].append((name, -1, j, 8.0 - j))
                tile["tile_attack_rate"].append((name, -1, j, 0.3 + 0.05 * j))
            for group in ("children", "young", "adults", "elderly"):
                for o in range(-10, 11):
                    age_inf.append((name, -1, group, o, max(0.0, 5.0 - abs(o))))
                    age_r.append((name, -1, group, o, max(0.0, 1.2 - 0.05 * o)))
        for d in range(1, 12):
            deg.append((name, -1, d, 100 // d))

    files["infected.csv"] = tidy(inf)
    files["recovered.csv"] = tidy(rec)
    files["tau.csv"] = tidy(tau)
    files["entropy.csv"] = tidy(ent)
    files["r_t.csv"] = tidy(r_t)
    files["attack_rate.csv"] = tidy(attack)
    files["r0_index.csv"] = tidy(r0)
    files["overlap.csv"] = tidy(theta, PAIR)
    files["contact_degree.csv"] = tidy(deg)
    for k, v in tile.items():
        files[f"{k}.csv"] = tidy(v)
    files["age_infected.csv"] = tidy(age_inf, GROUP)
    files["age_r.csv"] = tidy(age_r, GROUP)
    files["territory.csv"] = pd.DataFrame(
        {"tile": range(n_tiles), "row": [0, 0, 1, 1], "col": [0, 1, 0, 1],
         "population": [50, 200, 800, 3200]})
    if with_scan:
        files["delta.csv"] = tidy(
            [(name, -1, 0.02 + 0.005 * i, 1.0 + (2.0 if i == 3 else 0.0))
             for name in configs for i in range(6)])
    for name, frame in files.items():
        frame.to_csv(base / name, index=False)

    manifest = {"configurations": {name: {"beta": 0.04, "mu": 1 / 3,
                                          "replicas": 2, "n_outbreaks": 2}
                                   for name in configs},
                "files": sorted(files), "stages": ["build", "done"],
                "master_seed": 1}
    (base / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return base


@pytest.fixture()
def tree(tmp_path):
    return build_tree(tmp_path / "run")
