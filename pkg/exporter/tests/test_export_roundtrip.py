"""Exported files must satisfy the engine's dataset contract: they load
through the primary loader with zero validation errors."""

import json
import logging

import numpy as np
import pytest

from congruity.data import load_manifest
from congruity_exporter.backends import (GRID_SIDE, PATCH_COUNT,
                                         HashedBackend, tokenize)
from congruity_exporter.export import ExportOptions, export
from congruity_exporter.parsing import chain_edges, dependency_edges
from congruity_exporter.records import RawRecord


def test_ten_records_load_through_primary_loader(tmp_path, records):
    manifest, blob = export(records, tmp_path / "data", HashedBackend())
    samples = load_manifest(manifest)
    assert len(samples) == 10
    for sample in samples:
        assert sample.r == 49 and sample.grid_side == 7
        assert 1 <= sample.m <= 20
        assert sample.knowledge_edges is not None
    print(f"ACCEPTANCE PASS: exporter round-trip (10 records, r=49, p=7, "
          f"caption m <= 20, zero validation errors)")


def test_export_without_knowledge_sets_m_zero(tmp_path, records):
    manifest, _ = export(records, tmp_path / "nok", HashedBackend(),
                         ExportOptions(knowledge="none"))
    for sample in load_manifest(manifest):
        assert sample.m == 0 and sample.knowledge_embed is None
    lines = manifest.read_text().splitlines()
    rec = json.loads(lines[1])
    assert rec["m"] == 0 and rec["know_offset"] is None


def test_export_attribute_and_anp_knowledge(tmp_path, records):
    for kind in ("attributes", "anps"):
        manifest, _ = export(records, tmp_path / kind, HashedBackend(),
                             ExportOptions(knowledge=kind))
        for sample in load_manifest(manifest):
            assert sample.m >= 1


def test_precomputed_caption_wins_over_backend_caption(tmp_path, records):
    backend = HashedBackend()
    manifest, _ = export(records[:1], tmp_path / "cap", backend)
    sample = load_manifest(manifest)[0]
    caption_tokens = tokenize(records[0].caption, 20)
    assert sample.m == len(caption_tokens)
    expected = backend.encode_tokens(caption_tokens).astype("<f4").astype(np.float64)
    assert np.array_equal(sample.knowledge_embed, expected)


def test_export_is_idempotent(tmp_path, records):
    m1, b1 = export(records, tmp_path / "a", HashedBackend())
    m2, b2 = export(records, tmp_path / "b", HashedBackend())
    assert b1.read_bytes() == b2.read_bytes()
    assert m1.read_text().replace("a.blob", "?.blob") == \
        m2.read_text().replace("b.blob", "?.blob")


def test_unreadable_image_skipped_with_log(tmp_path, records, caplog):
    broken = RawRecord(id="broken", text="some text", image=str(tmp_path / "nope.png"),
                       label=0)
    with caplog.at_level(logging.WARNING):
        manifest, _ = export(records[:3] + [broken] + records[3:5], tmp_path / "skip",
                             HashedBackend())
    assert len(load_manifest(manifest)) == 5
    assert any("broken" in message for message in caplog.messages)


def test_long_text_and_caption_truncate_with_valid_edges(tmp_path, image_dir):
    long_text = " ".join(f"word{i}" for i in range(250))
    long_caption = " ".join(f"cap{i}" for i in range(50))
    record = RawRecord(id="long", text=long_text, image=str(image_dir / "img0.png"),
                       label=1, caption=long_caption)
    manifest, _ = export([record], tmp_path / "long", HashedBackend())
    sample = load_manifest(manifest)[0]
    assert sample.n == 100
    assert sample.m == 20
    assert all(i < sample.n and j < sample.n for i, j in sample.text_edges)
    assert all(i < sample.m and j < sample.m for i, j in sample.knowledge_edges)


def test_patch_features_depend_on_pixels(image_dir):
    backend = HashedBackend()
    a = backend.encode_image(image_dir / "img0.png")
    b = backend.encode_image(image_dir / "img1.png")
    assert a.shape == (PATCH_COUNT, backend.d_img)
    assert not np.allclose(a, b)


def test_dependency_edges_fallback_is_in_range():
    tokens = ["a", "b", "c", "d"]
    edges = dependency_edges(tokens)
    assert edges  # never empty for multi-token input
    assert all(0 <= i < 4 and 0 <= j < 4 for i, j in edges)
    assert chain_edges(4) == [(0, 1), (1, 2), (2, 3)]
    assert chain_edges(1) == []


def test_grid_constants_match_patch_layout():
    assert GRID_SIDE == 7
    assert PATCH_COUNT == 49


def test_pretrained_backend_requires_assets():
    pytest.importorskip("transformers")
    from congruity_exporter.backends import AssetsUnavailable, PretrainedBackend
    backend = PretrainedBackend(text_model="definitely/not-a-real-model")
    with pytest.raises(AssetsUnavailable):
        backend.encode_tokens(["hello"])
