"""Command-line entry points: render figures from an experiment manifest."""

from __future__ import annotations

import html
import sys
from pathlib import Path

import click

from .figures import FAMILIES
from .io import ManifestError, SchemaError, load_manifest

EXIT_INPUT = 2
EXIT_SCHEMA = 3


def render_families(manifest_path, out_dir, kinds=None):
    """Render the requested figure families; returns (written, skipped)
    where skipped maps family name to the reason."""
    _, base = load_manifest(manifest_path)
    out = Path(out_dir)
    kinds = list(kinds) if kinds else list(FAMILIES)
    written, skipped = {}, {}
    for kind in kinds:
        try:
            written[kind] = FAMILIES[kind](base, out)
        except FileNotFoundError as exc:
            skipped[kind] = f"missing input: {Path(str(exc)).name}"
    return written, skipped


def write_index(out: Path, written: dict, skipped: dict) -> Path:
    rows = []
    for kind, paths in written.items():
        png = next(p for p in paths if p.suffix == ".png")
        rows.append(f'<h2>{html.escape(kind)}</h2>'
                    f'<img src="{png.name}" style="max-width:100%">')
    for kind, reason in skipped.items():
        rows.append(f"<h2>{html.escape(kind)}</h2>"
                    f"<p>skipped: {html.escape(reason)}</p>")
    path = out / "index.html"
    path.write_text("<!doctype html><title>experiment report</title>\n"
                    + "\n".join(rows) + "\n")
    return path


@click.group()
def main():
    """Figure generation from simulation output trees."""


_manifest_opt = click.option("--manifest", required=True, type=click.Path(),
                             help="manifest.json (or its directory).")
_out_opt = click.option("--out", required=True, type=click.Path(),
                        help="Directory for the rendered images.")


@main.command()
@_manifest_opt
@_out_opt
@click.option("--kind", "kinds", multiple=True,
              type=click.Choice(sorted(FAMILIES)),
              help="Figure families to render (default: all).")
def render(manifest, out, kinds):
    """Render figure families as PNG and SVG."""
    written, skipped = render_families(manifest, out, kinds)
    for kind, paths in written.items():
        click.echo(f"{kind}: " + ", ".join(str(p) for p in paths))
    for kind, reason in skipped.items():
        click.echo(f"{kind}: skipped ({reason})")


@main.command()
@_manifest_opt
@_out_opt
def report(manifest, out):
    """Render every available figure family plus an HTML index."""
    written, skipped = render_families(manifest, out)
    index = write_index(Path(out), written, skipped)
    click.echo(f"report written: {index}")


def entry():  # pragma: no cover - thin wrapper for categorized exit codes
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except (ManifestError, FileNotFoundError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except SchemaError as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(EXIT_SCHEMA)


if __name__ == "__main__":  # pragma: no cover
    entry()
