"""Export pipeline: raw records -> manifest + blob dataset.

The output files follow the engine's dataset contract exactly: a blob
with magic ``HCE1``, little-endian u32 version 1, and raw little-endian
float32 regions; and a line-delimited JSON manifest whose first line is
the header (format marker, version, blob name, embedding widths, grid
side) followed by one record per sample with byte offsets into the blob.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import GRID_SIDE, PATCH_COUNT, AssetsUnavailable, tokenize
from .parsing import dependency_edges
from .records import RawRecord

log = logging.getLogger(__name__)

BLOB_MAGIC = b"HCE1"
BLOB_VERSION = 1
MANIFEST_FORMAT = "hce-manifest"
MANIFEST_VERSION = 1

MAX_TEXT_LEN = 100
MAX_KNOWLEDGE_LEN = 20

KNOWLEDGE_KINDS = ("captions", "attributes", "anps", "none")


@dataclass
class ExportOptions:
    knowledge: str = "captions"     # captions | attributes | anps | none
    image_encoder: str = "vit"      # vit | resnet (pretrained backend only)
    max_text_len: int = MAX_TEXT_LEN
    max_knowledge_len: int = MAX_KNOWLEDGE_LEN

    def validate(self) -> "ExportOptions":
        if self.knowledge not in KNOWLEDGE_KINDS:
            raise ValueError(f"knowledge must be one of {KNOWLEDGE_KINDS}")
        if self.image_encoder not in ("vit", "resnet"):
            raise ValueError("image_encoder must be 'vit' or 'resnet'")
        return self


def _knowledge_text(record: RawRecord, backend, options: ExportOptions) -> str | None:
    if options.knowledge == "none":
        return None
    if options.knowledge == "captions":
        if record.caption:
            return record.caption
        return backend.caption_image(record.image)
    words = record.attributes if options.knowledge == "attributes" else record.anps
    return " ".join(words) if words else None


def export(records: list[RawRecord], out_prefix, backend,
           options: ExportOptions | None = None) -> tuple[Path, Path]:
    """Encode every record and write the manifest+blob pair.

    Unreadable or unencodable records are skipped with a logged reason;
    all other errors propagate.
    """
    options = (options or ExportOptions()).validate()
    manifest_path = Path(f"{out_prefix}.manifest.jsonl")
    blob_path = Path(f"{out_prefix}.blob")

    blob = bytearray(BLOB_MAGIC + struct.pack("<I", BLOB_VERSION))
    manifest_records = []
    d_text = d_img = d_know = None

    def push(arr: np.ndarray) -> int:
        offset = len(blob)
        blob.extend(np.ascontiguousarray(arr, dtype="<f4").tobytes(order="C"))
        return offset

    for record in records:
        try:
            tokens = tokenize(record.text, options.max_text_len)
            if not tokens:
                raise ValueError("no tokens after tokenization")
            text_embed = backend.encode_tokens(tokens)
            image_embed = backend.encode_image(record.image)
            if image_embed.shape[0] != PATCH_COUNT:
                raise ValueError(f"encoder produced {image_embed.shape[0]} patches, "
                                 f"expected {PATCH_COUNT}")
            text_edges = dependency_edges(tokens)

            know_embed = None
            know_edges = None
            knowledge_text = _knowledge_text(record, backend, options)
            if knowledge_text:
                know_tokens = tokenize(knowledge_text, options.max_knowledge_len)
                if know_tokens:
                    know_embed = backend.encode_tokens(know_tokens)
                    know_edges = dependency_edges(know_tokens)
        except AssetsUnavailable:
            raise
        except Exception as exc:
            log.warning("skipping record %r: %s", record.id, exc)
            continue

        for edges, length, kind in ((text_edges, len(tokens), "text"),
                                    (know_edges or [], know_embed.shape[0]
                                     if know_embed is not None else 0, "knowledge")):
            for i, j in edges:
                if not (0 <= i < length and 0 <= j < length):
                    raise AssertionError(
                        f"record {record.id!r}: {kind} edge ({i},{j}) out of range")

        d_text = text_embed.shape[1]
        d_img = image_embed.shape[1]
        if know_embed is not None:
            d_know = know_embed.shape[1]

        manifest_records.append({
            "id": record.id,
            "label": record.label,
            "n": text_embed.shape[0],
            "r": PATCH_COUNT,
            "m": 0 if know_embed is None else know_embed.shape[0],
            "p": GRID_SIDE,
            "text_offset": push(text_embed),
            "image_offset": push(image_embed),
            "know_offset": push(know_embed) if know_embed is not None else None,
            "edges_text": [list(e) for e in text_edges],
            "edges_know": [list(e) for e in know_edges] if know_edges is not None else None,
        })

    if d_text is None:
        raise ValueError("no records survived export")

    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "blob": blob_path.name,
        "d_text": int(d_text),
        "d_img": int(d_img),
        "d_know": int(d_know or 0),
        "p": GRID_SIDE,
        "provenance": {
            "backend": backend.name,
            "knowledge": options.knowledge,
            "image_encoder": options.image_encoder if backend.name == "pretrained" else None,
            "models": {
                "text": getattr(backend, "text_model_name", None),
                "image": getattr(backend, "vit_model_name", None)
                if options.image_encoder == "vit" else "torchvision/resnet50",
                "caption": getattr(backend, "caption_model_name", None),
            } if backend.name == "pretrained" else None,
        },
    }
    blob_path.write_bytes(bytes(blob))
    with manifest_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in manifest_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    log.info("exported %d of %d records to %s", len(manifest_records), len(records),
             manifest_path)
    return manifest_path, blob_path
