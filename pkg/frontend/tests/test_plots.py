import hashlib
import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from urbanepi_plots import (FAMILIES, ManifestError, SchemaError,
                            load_manifest, render_families, write_index)
from urbanepi_plots.cli import main
from urbanepi_plots.figures import geo, overview, tiles

from conftest import build_tree


def test_report_renders_all_families(tree, tmp_path):
    out = tmp_path / "figs"
    result = CliRunner().invoke(main, ["report", "--manifest", str(tree),
                                       "--out", str(out)])
    assert result.exit_code == 0, result.output
    for family in FAMILIES:
        assert (out / f"{family}.png").exists()
        assert (out / f"{family}.svg").exists()
    index = (out / "index.html").read_text()
    for family in FAMILIES:
        assert family in index


def test_render_selected_kind(tree, tmp_path):
    out = tmp_path / "figs"
    result = CliRunner().invoke(main, ["render", "--manifest", str(tree),
                                       "--out", str(out), "--kind", "tiles"])
    assert result.exit_code == 0, result.output
    assert (out / "tiles.png").exists()
    assert not (out / "overview.png").exists()
    assert not (out / "index.html").exists()


def test_duplicated_run_overlap_is_flat_one(tmp_path):
    tree = build_tree(tmp_path / "dup", configs=("SN",), theta_value=1.0)
    theta = pd.read_csv(tree / "overlap.csv")
    means = theta.groupby("t_or_bin")["value"].mean()
    assert (means == 1.0).all()
    paths = geo(tree, tmp_path / "figs")
    assert all(p.exists() for p in paths)


def test_single_configuration_subset(tmp_path):
    tree = build_tree(tmp_path / "sn_only", configs=("SN",))
    written, skipped = render_families(tree, tmp_path / "figs")
    assert set(written) == set(FAMILIES) and not skipped


def test_empty_outbreak_set_renders(tmp_path):
    tree = build_tree(tmp_path / "dead", empty=True)
    written, _ = render_families(tree, tmp_path / "figs")
    assert set(written) == set(FAMILIES)


def test_missing_metric_skipped_in_index(tree, tmp_path):
    (tree / "tile_to_peak.csv").unlink()
    out = tmp_path / "figs"
    written, skipped = render_families(tree, out)
    assert "tiles" in skipped and "tile_to_peak.csv" in skipped["tiles"]
    index = write_index(out, written, skipped).read_text()
    assert "skipped" in index and "tile_to_peak.csv" in index


def test_schema_mismatch_names_column(tree, tmp_path):
    frame = pd.read_csv(tree / "infected.csv")
    frame.rename(columns={"value": "val"}).to_csv(tree / "infected.csv",
                                                  index=False)
    with pytest.raises(SchemaError, match="value"):
        overview(tree, tmp_path / "figs")


def test_corrupted_manifest_no_partial_index(tree, tmp_path):
    (tree / "manifest.json").write_text("{ not json")
    out = tmp_path / "figs"
    result = CliRunner().invoke(main, ["report", "--manifest", str(tree),
                                       "--out", str(out)],
                                standalone_mode=False)
    assert isinstance(result.exception, ManifestError)
    assert not (out / "index.html").exists()


def test_manifest_missing_key(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"files": []}))
    with pytest.raises(ManifestError, match="configurations"):
        load_manifest(path)


def test_rendering_is_read_only(tree, tmp_path):
    def digest():
        return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(tree.iterdir())}

    before = digest()
    render_families(tree, tmp_path / "figs")
    assert digest() == before


def test_placement_dirs_get_one_geo_figure_each(tree, tmp_path):
    for mode in ("random", "central"):
        sub = tree / f"place_{mode}"
        sub.mkdir()
        for name in ("tau.csv", "entropy.csv", "overlap.csv"):
            (sub / name).write_bytes((tree / name).read_bytes())
    paths = geo(tree, tmp_path / "figs")
    stems = {p.stem for p in paths}
    assert stems == {"geo_random", "geo_central"}


def test_tiles_use_log_population_axis(tree, tmp_path, monkeypatch):
    import urbanepi_plots.figures as figures

    scales = []
    orig = figures._save

    def spy(fig, out, stem):
        scales.extend(ax.get_xscale() for ax in fig.axes)
        return orig(fig, out, stem)

    monkeypatch.setattr(figures, "_save", spy)
    paths = tiles(tree, tmp_path / "figs")
    assert all(p.exists() for p in paths)
    assert scales == ["log", "log", "log"]
