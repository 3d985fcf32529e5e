"""Command-line entry points: build, run, scan, place."""

from __future__ import annotations

import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from .errors import ConfigurationError, InputError, UrbanEpiError
from .experiment import (Manifest, PLACEMENT_MODES, build_assets, load_config,
                         placement_study, run_experiment, scan_experiment,
                         write_assets)

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


def _load(config, seed, workers):
    cfg = load_config(config)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    return cfg


def _common(fn):
    fn = click.option("--config", required=True, type=click.Path(),
                      help="TOML experiment file.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the master seed.")(fn)
    fn = click.option("--workers", type=int, default=None,
                      help="Parallel worker processes.")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    """Age-stratified urban epidemic simulator."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
def build(config, seed, workers):
    """Generate the population and social network only."""
    cfg = _load(config, seed, workers)
    assets = build_assets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, cfg)
    manifest.add_files(write_assets(assets, out))
    manifest.doc["network"] = {
        "n_agents": assets.population.n, "n_tiles": assets.territory.n_tiles,
        "m_household": assets.graph.m_h, "m_acquaintance": assets.graph.m_a,
        "m_total": assets.graph.m_total,
        "realized_kappa": 2 * assets.graph.m_a / assets.population.n,
        "acq_normalization": assets.graph.acq_normalization,
    }
    manifest.stage("build")
    click.echo(f"wrote population and network tables to {out}")


@main.command()
@_common
@click.option("--emit-contact-log", is_flag=True,
              help="Record one replica's daily contact pairs per configuration.")
def run(config, seed, workers, emit_contact_log):
    """Run the full experiment: ensembles, metrics, CSVs, manifest."""
    cfg = _load(config, seed, workers)
    out = run_experiment(cfg, emit_contact_log=emit_contact_log)
    click.echo(f"experiment complete: {out / 'manifest.json'}")


@main.command()
@_common
def scan(config, seed, workers):
    """Threshold scan: Delta(beta) per configuration."""
    cfg = _load(config, seed, workers)
    if cfg.scan is None:
        raise ConfigurationError("config has no [scan] section")
    out = scan_experiment(cfg)
    click.echo(f"scan complete: {out / 'manifest.json'}")


@main.command()
@_common
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(PLACEMENT_MODES), default=PLACEMENT_MODES,
              help="Placement modes to run (repeatable).")
@click.option("--tile", "tiles", multiple=True, type=(str, int),
              help="Explicit tile override per mode, e.g. --tile central 7.")
def place(config, seed, workers, modes, tiles):
    """Index-case placement study (random / central / peripheral)."""
    cfg = _load(config, seed, workers)
    out = placement_study(cfg, modes=modes, overrides=dict(tiles))
    click.echo(f"placement study complete: {out / 'manifest.json'}")


def entry():  # pragma: no cover - thin wrapper for categorized exit codes
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except ConfigurationError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except InputError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except UrbanEpiError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":  # pragma: no cover
    entry()
