import json

import numpy as np
import pytest
from PIL import Image

from congruity_exporter.records import RawRecord


@pytest.fixture
def image_dir(tmp_path):
    """Ten small deterministic PNGs with varied content."""
    rng = np.random.Generator(np.random.Philox(key=4242))
    directory = tmp_path / "images"
    directory.mkdir()
    for i in range(10):
        pixels = (rng.random((64, 48, 3)) * 255).astype(np.uint8)
        pixels[:, :, i % 3] = np.minimum(255, pixels[:, :, i % 3] + 120)
        Image.fromarray(pixels).save(directory / f"img{i}.png")
    return directory


TEXTS = [
    "what a wonderful monday morning commute",
    "the weather report promised sunshine all week",
    "nothing beats cold coffee at six am",
    "my favorite meeting ran three hours long",
    "fresh snow on the first day of spring",
    "the new update fixed absolutely everything",
    "airport security was a breeze today",
    "this printer works perfectly every single time",
    "traffic was light for the big game",
    "the gym is empty in january as always",
]


@pytest.fixture
def records(image_dir):
    out = []
    for i, text in enumerate(TEXTS):
        out.append(RawRecord(
            id=f"rec-{i}",
            text=text,
            image=str(image_dir / f"img{i}.png"),
            label=i % 2,
            caption="a person standing near a window" if i % 3 == 0 else None,
            attributes=["window", "person", "indoor"],
            anps=["sunny day", "crowded room"],
        ))
    return out


@pytest.fixture
def records_file(tmp_path, records):
    path = tmp_path / "records.jsonl"
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps({
                "id": r.id, "text": r.text, "image": r.image, "label": r.label,
                **({"caption": r.caption} if r.caption else {}),
                "attributes": r.attributes, "anps": r.anps,
            }) + "\n")
    return path
