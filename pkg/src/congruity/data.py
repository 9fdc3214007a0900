"""On-disk sample format, validation, and the per-modality projection MLPs.

A dataset is a pair of files:

* blob: magic ``HCE1``, little-endian u32 version (=1), then raw
  little-endian float32 regions, row-major.
* manifest: UTF-8 line-delimited JSON. The first line is a header
  ``{"format": "hce-manifest", "version": 1, "blob", "d_text", "d_img",
  "d_know", "p"}``; each following line is one sample record
  ``{"id", "label", "n", "r", "m", "p", "text_offset", "image_offset",
  "know_offset", "edges_text", "edges_know"}`` with offsets in bytes from
  blob start.

Embeddings are decoded to float64 for all in-memory computation; the
32-bit file precision is the round-trip contract.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError, ShapeError
from .tensor import Tensor, add, matmul, relu

BLOB_MAGIC = b"HCE1"
BLOB_VERSION = 1
BLOB_HEADER_SIZE = 8
MANIFEST_FORMAT = "hce-manifest"
MANIFEST_VERSION = 1

Edge = tuple[int, int]


@dataclass(frozen=True)
class Sample:
    """One post: token/patch (and optionally knowledge) embeddings plus
    dependency edges and a binary label. Immutable after validation."""

    id: str
    label: int
    text_embed: np.ndarray            # (n, d_text) float64
    image_embed: np.ndarray           # (r, d_img) float64
    knowledge_embed: np.ndarray | None  # (m, d_know) float64
    text_edges: tuple[Edge, ...]
    knowledge_edges: tuple[Edge, ...] | None
    grid_side: int                    # p, with p*p == r

    @property
    def n(self) -> int:
        return self.text_embed.shape[0]

    @property
    def r(self) -> int:
        return self.image_embed.shape[0]

    @property
    def m(self) -> int:
        return 0 if self.knowledge_embed is None else self.knowledge_embed.shape[0]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_edges(edges, length: int, sample_id: str, kind: str) -> tuple[Edge, ...]:
    out = []
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < length and 0 <= j < length):
            raise DataError(
                f"sample {sample_id!r}: {kind} edge ({i},{j}) out of range for length {length}"
            )
        out.append((i, j))
    return tuple(out)


def validate_sample(sample: Sample, max_text_len: int = 100,
                    max_knowledge_len: int = 20) -> Sample:
    """Check all Sample invariants; returns the sample for chaining."""
    sid = sample.id
    n, r, m = sample.n, sample.r, sample.m
    if sample.label not in (0, 1):
        raise DataError(f"sample {sid!r}: label must be 0 or 1, got {sample.label}")
    if not 1 <= n <= max_text_len:
        raise DataError(f"sample {sid!r}: n={n} outside [1, {max_text_len}]")
    if sample.grid_side < 1 or sample.grid_side ** 2 != r:
        raise DataError(f"sample {sid!r}: r={r} is not grid_side^2={sample.grid_side ** 2}")
    if sample.knowledge_embed is not None and not 1 <= m <= max_knowledge_len:
        raise DataError(f"sample {sid!r}: m={m} outside [1, {max_knowledge_len}]")
    for arr, kind in ((sample.text_embed, "text"), (sample.image_embed, "image"),
                      (sample.knowledge_embed, "knowledge")):
        if arr is not None and not np.isfinite(arr).all():
            raise DataError(f"sample {sid!r}: {kind} embeddings contain NaN/Inf")
    _check_edges(sample.text_edges, n, sid, "text")
    if sample.knowledge_edges:
        if m == 0:
            raise DataError(f"sample {sid!r}: knowledge edges given without knowledge tokens")
        _check_edges(sample.knowledge_edges, m, sid, "knowledge")
    return sample


def make_sample(id: str, label: int, text_embed, image_embed, grid_side: int,
                text_edges=(), knowledge_embed=None, knowledge_edges=None,
                max_text_len: int = 100, max_knowledge_len: int = 20) -> Sample:
    """Build and validate an immutable Sample from raw arrays."""
    sample = Sample(
        id=str(id),
        label=int(label),
        text_embed=_freeze(np.atleast_2d(text_embed)),
        image_embed=_freeze(np.atleast_2d(image_embed)),
        knowledge_embed=None if knowledge_embed is None else _freeze(np.atleast_2d(knowledge_embed)),
        text_edges=tuple((int(i), int(j)) for i, j in text_edges),
        knowledge_edges=None if knowledge_edges is None
        else tuple((int(i), int(j)) for i, j in knowledge_edges),
        grid_side=int(grid_side),
    )
    return validate_sample(sample, max_text_len, max_knowledge_len)


# ---------------------------------------------------------------------------
# manifest + blob I/O


def write_manifest(samples: list[Sample], manifest_path, blob_path,
                   d_text: int | None = None, d_img: int | None = None,
                   d_know: int | None = None, p: int | None = None) -> None:
    """Write samples to the manifest+blob pair. Dimension arguments are
    only needed for an empty sample list; otherwise they are derived from
    the first sample and checked against the rest."""
    manifest_path, blob_path = Path(manifest_path), Path(blob_path)
    if samples:
        first = samples[0]
        d_text = first.text_embed.shape[1]
        d_img = first.image_embed.shape[1]
        p = first.grid_side
        with_know = next((s for s in samples if s.knowledge_embed is not None), None)
        if with_know is not None:
            d_know = with_know.knowledge_embed.shape[1]
    elif None in (d_text, d_img, p):
        raise ConfigError("write_manifest with no samples needs explicit d_text, d_img, p")
    d_know = d_know or 0

    records = []
    blob = bytearray(BLOB_MAGIC + struct.pack("<I", BLOB_VERSION))

    def push(arr: np.ndarray) -> int:
        offset = len(blob)
        blob.extend(arr.astype("<f4").tobytes(order="C"))
        return offset

    for s in samples:
        if s.text_embed.shape[1] != d_text or s.image_embed.shape[1] != d_img:
            raise DataError(f"sample {s.id!r}: embedding widths differ from dataset header")
        if s.grid_side != p:
            raise DataError(f"sample {s.id!r}: grid side {s.grid_side} != dataset p={p}")
        if s.knowledge_embed is not None and s.knowledge_embed.shape[1] != d_know:
            raise DataError(f"sample {s.id!r}: knowledge width differs from dataset header")
        rec = {
            "id": s.id,
            "label": s.label,
            "n": s.n,
            "r": s.r,
            "m": s.m,
            "p": s.grid_side,
            "text_offset": push(s.text_embed),
            "image_offset": push(s.image_embed),
            "know_offset": push(s.knowledge_embed) if s.knowledge_embed is not None else None,
            "edges_text": [list(e) for e in s.text_edges],
            "edges_know": [list(e) for e in s.knowledge_edges]
            if s.knowledge_edges is not None else None,
        }
        records.append(rec)

    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "blob": blob_path.name,
        "d_text": int(d_text),
        "d_img": int(d_img),
        "d_know": int(d_know),
        "p": int(p),
    }
    blob_path.write_bytes(bytes(blob))
    with manifest_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_region(blob: bytes, offset, rows: int, cols: int, sample_id: str,
                 kind: str) -> np.ndarray:
    if offset is None:
        raise FormatError(f"sample {sample_id!r}: missing {kind} offset")
    offset = int(offset)
    nbytes = rows * cols * 4
    if offset < BLOB_HEADER_SIZE:
        raise FormatError(f"sample {sample_id!r}: {kind} offset {offset} inside blob header")
    if offset + nbytes > len(blob):
        raise FormatError(
            f"sample {sample_id!r}: blob truncated; {kind} region needs bytes "
            f"[{offset}, {offset + nbytes}) but blob ends at byte {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=offset)
    return flat.astype(np.float64).reshape(rows, cols)


def load_manifest(manifest_path, blob_path=None, max_text_len: int = 100,
                  max_knowledge_len: int = 20) -> list[Sample]:
    """Load and fully validate all samples from a manifest+blob pair.

    ``blob_path`` defaults to the header's blob name resolved next to the
    manifest.
    """
    manifest_path = Path(manifest_path)
    try:
        lines = manifest_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not lines:
        raise FormatError(f"manifest {manifest_path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest header is not valid JSON: {exc}") from exc
    if header.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"bad manifest format marker: {header.get('format')!r}")
    if header.get("version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported manifest version: {header.get('version')!r}")

    if blob_path is None:
        blob_path = manifest_path.parent / header["blob"]
    blob_path = Path(blob_path)
    try:
        blob = blob_path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read blob {blob_path}: {exc}") from exc
    if blob[:4] != BLOB_MAGIC:
        raise FormatError(f"bad blob magic: {blob[:4]!r} (expected {BLOB_MAGIC!r})")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != BLOB_VERSION:
        raise FormatError(f"unsupported blob version: {version}")

    d_text, d_img, d_know = header["d_text"], header["d_img"], header["d_know"]
    samples = []
    regions: list[tuple[int, int, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest line {lineno} is not valid JSON: {exc}") from exc
        sid = str(rec.get("id", f"line-{lineno}"))
        n, r, m, p = int(rec["n"]), int(rec["r"]), int(rec["m"]), int(rec["p"])
        text = _read_region(blob, rec["text_offset"], n, d_text, sid, "text")
        image = _read_region(blob, rec["image_offset"], r, d_img, sid, "image")
        regions.append((int(rec["text_offset"]), n * d_text * 4, sid))
        regions.append((int(rec["image_offset"]), r * d_img * 4, sid))
        know = None
        if m > 0:
            know = _read_region(blob, rec["know_offset"], m, d_know, sid, "knowledge")
            regions.append((int(rec["know_offset"]), m * d_know * 4, sid))
        sample = make_sample(
            id=sid,
            label=int(rec["label"]),
            text_embed=text,
            image_embed=image,
            grid_side=p,
            text_edges=[(int(i), int(j)) for i, j in rec["edges_text"]],
            knowledge_embed=know,
            knowledge_edges=None if rec.get("edges_know") is None
            else [(int(i), int(j)) for i, j in rec["edges_know"]],
            max_text_len=max_text_len,
            max_knowledge_len=max_knowledge_len,
        )
        samples.append(sample)

    regions.sort()
    for (off_a, len_a, sid_a), (off_b, _, sid_b) in zip(regions, regions[1:]):
        if off_a + len_a > off_b:
            raise FormatError(
                f"blob regions overlap: sample {sid_a!r} region at byte {off_a} runs into "
                f"sample {sid_b!r} region at byte {off_b}"
            )
    return samples


# ---------------------------------------------------------------------------
# projection MLPs (raw embedding spaces -> shared d-dim space)


@dataclass
class ProjectionMLP:
    """Two affine layers with a ramp nonlinearity between them."""

    w1: Tensor  # (d_raw, d_hidden)
    b1: Tensor  # (1, d_hidden)
    w2: Tensor  # (d_hidden, d)
    b2: Tensor  # (1, d)

    @property
    def input_width(self) -> int:
        return self.w1.shape[0]

    @property
    def output_width(self) -> int:
        return self.w2.shape[1]


def project(seq, mlp: ProjectionMLP) -> Tensor:
    """Row-wise projection of a (k, d_raw) sequence into the shared space."""
    x = seq if isinstance(seq, Tensor) else Tensor(seq)
    if x.shape[1] != mlp.input_width:
        raise ShapeError(
            f"projection input width {x.shape[1]} != mlp input width {mlp.input_width}"
        )
    hidden = relu(add(matmul(x, mlp.w1), mlp.b1))
    return add(matmul(hidden, mlp.w2), mlp.b2)


# ---------------------------------------------------------------------------
# batching


def make_batch(samples: list[Sample], indices) -> list[Sample]:
    """Select a batch; sequences vary in length so a batch is just a list."""
    indices = list(indices)
    if not indices:
        raise ConfigError("empty batch")
    return [samples[i] for i in indices]


def iter_batches(count: int, batch_size: int, rng: np.random.Generator | None = None):
    """Yield index lists covering range(count), optionally shuffled."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    order = np.arange(count) if rng is None else rng.permutation(count)
    for start in range(0, count, batch_size):
        yield [int(i) for i in order[start:start + batch_size]]
