"""Congruity score dumps for visualization.

The CSV groups labeled sections, each introduced by a ``# section:``
header line followed by comma-separated rows. Floats are written with
shortest round-trip repr, so parsing the file reproduces the in-memory
values exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Sample
from .errors import FormatError
from .fusion import CongruityBundle
from .model import forward_sample
from .train import Checkpoint

SECTION_ORDER = [
    "atomic_similarity",
    "token_weights",
    "atomic_scores",
    "composition_similarity",
    "composition_node_weights",
    "composition_scores",
    "patch_weights",
    "know_atomic_similarity",
    "know_token_weights",
    "know_atomic_scores",
    "know_composition_similarity",
    "know_composition_node_weights",
    "know_composition_scores",
    "know_weights",
    "probs",
]


def bundle_sections(bundle: CongruityBundle) -> dict[str, np.ndarray]:
    """The dumpable sections of a bundle, 2-D, in canonical order."""
    sections = {}
    for name in SECTION_ORDER:
        value = getattr(bundle, name)
        if value is not None:
            sections[name] = np.atleast_2d(value)
    return sections


def write_congruity_csv(bundle: CongruityBundle, path) -> None:
    lines = []
    for name, arr in bundle_sections(bundle).items():
        lines.append(f"# section: {name}")
        for row in arr:
            lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def dump_congruity(checkpoint: Checkpoint, sample: Sample, path) -> CongruityBundle:
    """Run one sample through a checkpoint (inference mode) and write its
    congruity maps; returns the dumped bundle."""
    result = forward_sample(checkpoint.params, sample, checkpoint.config,
                            checkpoint.dims, training=False)
    write_congruity_csv(result.bundle, path)
    return result.bundle


def parse_congruity_csv(path) -> dict[str, np.ndarray]:
    """Read a dump back into section name -> 2-D array."""
    sections: dict[str, list[list[float]]] = {}
    current: list[list[float]] | None = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("# section:"):
            name = line.split(":", 1)[1].strip()
            current = sections.setdefault(name, [])
        elif current is None:
            raise FormatError(f"{path}:{lineno}: data before any section header")
        else:
            current.append([float(v) for v in line.split(",")])
    return {name: np.array(rows) for name, rows in sections.items()}
