"""Figure rendering for spinecho CSV artifacts."""

__version__ = "0.1.0"

from .figures import KINDS, FigureSpec, overlay_curves, render
from .io import RunMeta, SchemaError, meta_for_csv, read_manifest, read_table

__all__ = [
    "FigureSpec",
    "KINDS",
    "RunMeta",
    "SchemaError",
    "meta_for_csv",
    "overlay_curves",
    "read_manifest",
    "read_table",
    "render",
]
