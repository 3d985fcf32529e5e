"""Loading and validation of experiment output trees.

Everything here works off the documented CSV schemas and manifest.json;
the simulation package itself is never imported.
"""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd

TIDY_COLUMNS = ["config", "replica", "t_or_bin", "value"]
PAIR_COLUMNS = ["config", "replica", "replica_b", "t_or_bin", "value"]
GROUP_COLUMNS = ["config", "replica", "group", "t_or_bin", "value"]


class SchemaError(ValueError):
    """A CSV does not match its documented column layout."""


class ManifestError(ValueError):
    """manifest.json is missing, unreadable, or structurally wrong."""


def load_manifest(path: str | Path) -> tuple[dict, Path]:
    """Read and structurally validate a manifest; returns (doc, run dir)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    for key in ("configurations", "files", "stages"):
        if key not in doc:
            raise ManifestError(f"manifest lacks required key '{key}'")
    return doc, path.parent


def read_tidy(base: Path, name: str, columns: list[str] | None = None) -> pd.DataFrame:
    """Read one metric table, checking its column layout."""
    columns = columns or TIDY_COLUMNS
    path = base / name
    if not path.exists():
        raise FileNotFoundError(path)
    frame = pd.read_csv(path)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{name}: missing column(s) {', '.join(missing)}; "
                          f"found {list(frame.columns)}")
    return frame


def read_optional(base: Path, name: str, columns: list[str] | None = None):
    """Like read_tidy but returns None when the file is absent."""
    try:
        return read_tidy(base, name, columns)
    except FileNotFoundError:
        return None


def read_territory(base: Path) -> pd.DataFrame:
    frame = pd.read_csv(base / "territory.csv")
    missing = [c for c in ("tile", "population") if c not in frame.columns]
    if missing:
        raise SchemaError(f"territory.csv: missing column(s) {', '.join(missing)}")
    return frame
