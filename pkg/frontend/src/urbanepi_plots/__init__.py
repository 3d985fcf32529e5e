"""Figure generation for urbanepi experiment output trees.

Consumes only the documented CSV schemas and manifest.json; see
`plots render --help` and `plots report --help`.
"""

from .cli import render_families, write_index
from .figures import FAMILIES, ages, geo, overview, tiles
from .io import ManifestError, SchemaError, load_manifest

__version__ = "0.1.0"

__all__ = ["FAMILIES", "ManifestError", "SchemaError", "ages", "geo",
           "load_manifest", "overview", "render_families", "tiles",
           "write_index"]
