"""Raw input records and dataset-level filtering."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

# words that give the label away; records containing them are dropped
BANNED_WORDS = ("sarcasm", "sarcastic", "irony", "ironic")
_BANNED_RE = re.compile(r"\b(" + "|".join(BANNED_WORDS) + r")\b", re.IGNORECASE)


@dataclass
class RawRecord:
    id: str
    text: str
    image: str                      # path to the image file
    label: int
    caption: str | None = None      # precomputed caption, if any
    attributes: list[str] = field(default_factory=list)
    anps: list[str] = field(default_factory=list)

    def validate(self) -> "RawRecord":
        if not self.text.strip():
            raise ValueError(f"record {self.id!r}: text is empty")
        if self.label not in (0, 1):
            raise ValueError(f"record {self.id!r}: label must be 0 or 1")
        return self


def read_records(path) -> list[RawRecord]:
    """Read line-delimited JSON records."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        records.append(RawRecord(
            id=str(obj["id"]),
            text=str(obj["text"]),
            image=str(obj["image"]),
            label=int(obj["label"]),
            caption=obj.get("caption"),
            attributes=list(obj.get("attributes", [])),
            anps=list(obj.get("anps", [])),
        ).validate())
    return records


def filter_dataset(records: list[RawRecord]) -> list[RawRecord]:
    """Drop records whose text contains a word that gives the label away
    (case-insensitive, whole-word match)."""
    kept = [r for r in records if not _BANNED_RE.search(r.text)]
    log.info("filter_dataset: %d of %d records kept (%d filtered)",
             len(kept), len(records), len(records) - len(kept))
    return kept
