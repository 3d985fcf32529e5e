"""The four figure families rendered from an experiment output tree:

- overview: degree distributions, prevalence/recovered curves, R(t),
  index-case histograms, and the threshold scan when present
- ages: peak-aligned per-age-group infection and reproduction curves
- tiles: per-tile timing and attack statistics against tile population
- geo: spread fraction, entropy, and replica-overlap triptychs, one per
  index-placement mode when a placement study is present

Each renderer returns the list of image paths it wrote (PNG and SVG).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .io import GROUP_COLUMNS, PAIR_COLUMNS, read_optional, read_tidy, read_territory

CONFIG_ORDER = ["HM", "SN", "HN", "AN", "DN", "ADN"]
_CMAP = plt.get_cmap("tab10")


def _color(name: str):
    idx = CONFIG_ORDER.index(name) if name in CONFIG_ORDER else 9
    return _CMAP(idx)


def _configs(frame: pd.DataFrame) -> list[str]:
    present = frame["config"].unique().tolist()
    return [c for c in CONFIG_ORDER if c in present] + \
           [c for c in present if c not in CONFIG_ORDER]


def _empty(ax, message: str) -> None:
    ax.text(0.5, 0.5, message, ha="center", va="center",
            transform=ax.transAxes, fontsize=9, color="gray")
    ax.set_xticks([])
    ax.set_yticks([])


def _save(fig, out: Path, stem: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for ext in ("png", "svg"):
        path = out / f"{stem}.{ext}"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        paths.append(path)
    plt.close(fig)
    return paths


def _mean_curves(ax, frame: pd.DataFrame, ylabel: str) -> None:
    if frame.empty:
        _empty(ax, "no outbreaks")
    else:
        for name in _configs(frame):
            sub = frame[frame["config"] == name]
            mean = sub.groupby("t_or_bin")["value"].mean()
            ax.plot(mean.index, mean.values, label=name, color=_color(name))
        ax.legend(fontsize=7)
    ax.set_xlabel("day")
    ax.set_ylabel(ylabel)


def overview(base: Path, out: Path) -> list[Path]:
    """Six-panel configuration comparison."""
    fig, axes = plt.subplots(2, 3, figsize=(13, 7.5))
    degree = read_tidy(base, "contact_degree.csv")

    ax = axes[0, 0]
    for name in _configs(degree):
        sub = degree[degree["config"] == name]
        total = sub["value"].sum()
        ax.loglog(sub["t_or_bin"], sub["value"] / total, ".",
                  ms=4, label=name, color=_color(name))
    ax.set_xlabel("daily contact degree")
    ax.set_ylabel("frequency")
    ax.legend(fontsize=7)

    _mean_curves(axes[0, 1], read_tidy(base, "infected.csv"),
                 "infected fraction")
    _mean_curves(axes[0, 2], read_tidy(base, "recovered.csv"),
                 "recovered fraction")

    ax = axes[1, 0]
    r_t = read_tidy(base, "r_t.csv")
    if r_t.empty:
        _empty(ax, "no outbreaks")
    else:
        for name in _configs(r_t):
            sub = r_t[r_t["config"] == name]
            ax.plot(sub["t_or_bin"], sub["value"], label=name,
                    color=_color(name), lw=0.9)
        ax.axhline(1.0, color="k", ls=":", lw=0.8)
        ax.legend(fontsize=7)
    ax.set_xlabel("day")
    ax.set_ylabel("R(t)")

    ax = axes[1, 1]
    r0 = read_tidy(base, "r0_index.csv")
    for name in _configs(r0):
        vals = r0.loc[r0["config"] == name, "value"]
        ax.hist(vals, bins=np.arange(-0.5, vals.max() + 1.5), histtype="step",
                label=f"{name} (mean {vals.mean():.2f})", color=_color(name))
    ax.set_xlabel("index-case secondary infections")
    ax.set_ylabel("replicas")
    ax.legend(fontsize=7)

    ax = axes[1, 2]
    delta = read_optional(base, "delta.csv")
    if delta is None or delta.empty:
        _empty(ax, "no threshold scan in this run")
    else:
        for name in _configs(delta):
            sub = delta[delta["config"] == name]
            ax.plot(sub["t_or_bin"], sub["value"], "o-", ms=3,
                    label=name, color=_color(name))
        ax.legend(fontsize=7)
    ax.set_xlabel(r"$\beta$")
    ax.set_ylabel(r"$\Delta(\beta)$")

    fig.suptitle("configuration overview")
    return _save(fig, out, "overview")


def ages(base: Path, out: Path) -> list[Path]:
    """Peak-aligned infection and reproduction curves per age group."""
    infected = read_tidy(base, "age_infected.csv", GROUP_COLUMNS)
    r_by_age = read_tidy(base, "age_r.csv", GROUP_COLUMNS)
    names = _configs(infected) or ["(none)"]
    fig, axes = plt.subplots(2, len(names), figsize=(4 * len(names), 6.5),
                             squeeze=False)
    for col, name in enumerate(names):
        for row, (frame, ylabel) in enumerate(
                ((infected, "mean infected"), (r_by_age, "R(t)"))):
            ax = axes[row, col]
            sub = frame[frame["config"] == name]
            if sub.empty:
                _empty(ax, "no outbreaks")
            else:
                for group, g in sub.groupby("group"):
                    g = g.dropna(subset=["value"])
                    ax.plot(g["t_or_bin"], g["value"], label=str(group), lw=0.9)
                if row == 0:
                    ax.legend(fontsize=7)
            ax.set_xlabel("days from prevalence peak")
            ax.set_ylabel(ylabel)
            if row == 0:
                ax.set_title(name)
    fig.suptitle("age-group dynamics")
    return _save(fig, out, "ages")


TILE_PANELS = (("tile_first_infection.csv", "first infection day"),
               ("tile_to_peak.csv", "days from first infection to tile peak"),
               ("tile_attack_rate.csv", "tile attack rate"))


def tiles(base: Path, out: Path) -> list[Path]:
    """Tile statistics against tile population (logarithmic x-axis)."""
    territory = read_territory(base)
    pop = territory.set_index("tile")["population"]
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, (fname, ylabel) in zip(axes, TILE_PANELS):
        frame = read_tidy(base, fname)
        if frame.empty:
            _empty(ax, "no outbreaks")
        else:
            for name in _configs(frame):
                sub = frame[frame["config"] == name].dropna(subset=["value"])
                ax.semilogx(pop.loc[sub["t_or_bin"]], sub["value"], "o",
                            ms=4, alpha=0.7, label=name, color=_color(name))
            ax.legend(fontsize=7)
        ax.set_xlabel("tile population")
        ax.set_ylabel(ylabel)
    fig.suptitle("tile statistics")
    return _save(fig, out, "tiles")


def _geo_triptych(base: Path, out: Path, stem: str, title: str) -> list[Path]:
    tau = read_tidy(base, "tau.csv")
    entropy = read_tidy(base, "entropy.csv")
    theta = read_tidy(base, "overlap.csv", PAIR_COLUMNS)
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))

    for ax, frame, ylabel, xlabel in (
            (axes[0], tau, r"$\tau(t)$ spread fraction", "day"),
            (axes[1], entropy, "normalized entropy H(t)", "day")):
        if frame.empty:
            _empty(ax, "no outbreaks")
        else:
            for name in _configs(frame):
                sub = frame[frame["config"] == name].dropna(subset=["value"])
                mean = sub.groupby("t_or_bin")["value"].mean()
                ax.plot(mean.index, mean.values, label=name, color=_color(name))
            ax.legend(fontsize=7)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)

    ax = axes[2]
    if theta.empty:
        _empty(ax, "fewer than two outbreaks")
    else:
        for name in _configs(theta):
            sub = theta[theta["config"] == name].dropna(subset=["value"])
            grouped = sub.groupby("t_or_bin")["value"]
            mean = grouped.mean()
            lo = grouped.quantile(0.025)
            hi = grouped.quantile(0.975)
            ax.plot(mean.index, mean.values, label=name, color=_color(name))
            ax.fill_between(mean.index, lo, hi, color=_color(name), alpha=0.15)
        ax.set_ylim(0, 1.05)
        ax.legend(fontsize=7)
    ax.set_xlabel(r"$t / t_{peak}$")
    ax.set_ylabel(r"overlap $\theta^{a,b}$")
    fig.suptitle(title)
    return _save(fig, out, stem)


def geo(base: Path, out: Path) -> list[Path]:
    """Spread/entropy/overlap triptychs, one per placement mode when a
    placement study exists, otherwise for the main run."""
    modes = sorted(p.name[len("place_"):] for p in base.glob("place_*")
                   if p.is_dir())
    if not modes:
        return _geo_triptych(base, out, "geo", "geographic spread and overlap")
    paths = []
    for mode in modes:
        paths += _geo_triptych(base / f"place_{mode}", out, f"geo_{mode}",
                               f"geographic spread and overlap - {mode} seeding")
    return paths


FAMILIES = {"overview": overview, "ages": ages, "tiles": tiles, "geo": geo}
