"""Synthetic desk-scale datasets.

Each sample draws a unit latent direction near a fixed cluster center
(the center is a distribution constant keyed by d_raw, not by the
sampling seed, so differently-seeded splits share one distribution).
Tokens always scatter around the latent; patches scatter around it for
congruent samples (label 0) and around its negation for incongruent ones
(label 1), so the label is linearly separable from the sign of the
text-image congruity alone. Knowledge tokens copy the patch latent with
little noise, and ``image_noise`` can drown the patches specifically,
which makes the knowledge branch genuinely informative when the image is
unreliable.

Embeddings are quantized to float32 before use so in-memory generation
matches the file round-trip bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Sample, make_sample, write_manifest
from .errors import ConfigError
from .rng import stream


@dataclass
class SyntheticSpec:
    count: int
    n_range: tuple[int, int] = (4, 10)
    p: int = 4
    m_range: tuple[int, int] = (3, 6)
    d_raw: int = 16
    seed: int = 0
    image_noise: float = 0.0
    token_noise: float = 0.25
    patch_noise: float = 0.25
    knowledge_noise: float = 0.1
    latent_spread: float = 0.7  # per-sample scatter around the cluster center

    def validate(self) -> "SyntheticSpec":
        if self.count < 0:
            raise ConfigError(f"count must be >= 0, got {self.count}")
        if self.p < 1 or self.d_raw < 1:
            raise ConfigError("p and d_raw must be positive")
        for lo, hi, name in ((*self.n_range, "n_range"), (*self.m_range, "m_range")):
            if not 1 <= lo <= hi:
                raise ConfigError(f"{name} must satisfy 1 <= lo <= hi, got ({lo},{hi})")
        return self


def _cluster_center(d_raw: int) -> np.ndarray:
    center = stream(104729, f"synth-center/{d_raw}").normal(size=d_raw)
    return center / np.linalg.norm(center)


def _quantize(arr: np.ndarray) -> np.ndarray:
    return arr.astype("<f4").astype(np.float64)


def _edges(rs: np.random.Generator, length: int) -> list[tuple[int, int]]:
    chain = [(i, i + 1) for i in range(length - 1)]
    extras = []
    for a, b in rs.integers(0, length, size=(length // 3, 2)):
        if a != b:
            extras.append((int(a), int(b)))
    return chain + extras


def gen_synthetic(spec: SyntheticSpec) -> list[Sample]:
    """Generate ``spec.count`` validated samples in memory."""
    spec.validate()
    center = _cluster_center(spec.d_raw)
    samples = []
    for i in range(spec.count):
        rs = stream(spec.seed, f"synth/{i}")
        label = int(rs.integers(0, 2))
        latent = center + spec.latent_spread * rs.normal(size=spec.d_raw)
        latent /= np.linalg.norm(latent)
        n = int(rs.integers(spec.n_range[0], spec.n_range[1] + 1))
        m = int(rs.integers(spec.m_range[0], spec.m_range[1] + 1))
        r = spec.p ** 2

        tokens = latent + spec.token_noise * rs.normal(size=(n, spec.d_raw))
        patch_latent = latent if label == 0 else -latent
        patches = (patch_latent
                   + spec.patch_noise * rs.normal(size=(r, spec.d_raw))
                   + spec.image_noise * rs.normal(size=(r, spec.d_raw)))
        knowledge = patch_latent + spec.knowledge_noise * rs.normal(size=(m, spec.d_raw))

        samples.append(make_sample(
            id=f"synth-{spec.seed}-{i:05d}",
            label=label,
            text_embed=_quantize(tokens),
            image_embed=_quantize(patches),
            grid_side=spec.p,
            text_edges=_edges(rs, n),
            knowledge_embed=_quantize(knowledge),
            knowledge_edges=_edges(rs, m),
        ))
    return samples


def write_synthetic(spec: SyntheticSpec, out_prefix) -> tuple[Path, Path]:
    """Generate and write the manifest+blob pair for ``out_prefix``."""
    manifest_path = Path(f"{out_prefix}.manifest.jsonl")
    blob_path = Path(f"{out_prefix}.blob")
    samples = gen_synthetic(spec)
    write_manifest(samples, manifest_path, blob_path,
                   d_text=spec.d_raw, d_img=spec.d_raw, d_know=spec.d_raw, p=spec.p)
    return manifest_path, blob_path
