"""Bridges raw text+image records to the congruity engine's dataset files."""

from .backends import (GRID_SIDE, PATCH_COUNT, AssetsUnavailable,
                       HashedBackend, PretrainedBackend, make_backend,
                       tokenize)
from .export import ExportOptions, export
from .parsing import dependency_edges
from .records import BANNED_WORDS, RawRecord, filter_dataset, read_records

__version__ = "0.1.0"
