"""Dependency edges over word tokens.

Uses spaCy when it is importable and a model is installed; otherwise
falls back to chaining adjacent tokens, which keeps every downstream
graph connected and every index in range. Either way the edges are
word-level and refer to the same token list the text encoder embeds.
"""

from __future__ import annotations

import logging

log = logging.getLogger(__name__)

_SPACY_PIPELINE = None
_SPACY_FAILED = False


def _spacy_pipeline():
    global _SPACY_PIPELINE, _SPACY_FAILED
    if _SPACY_PIPELINE is None and not _SPACY_FAILED:
        try:
            import spacy
            _SPACY_PIPELINE = spacy.load("en_core_web_sm")
        except Exception as exc:
            log.info("spaCy unavailable (%s); using adjacency-chain fallback", exc)
            _SPACY_FAILED = True
    return _SPACY_PIPELINE


def chain_edges(length: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(length - 1)]


def dependency_edges(tokens: list[str]) -> list[tuple[int, int]]:
    """Edges between token indices; indices are always < len(tokens)."""
    n = len(tokens)
    pipeline = _spacy_pipeline()
    if pipeline is None:
        return chain_edges(n)
    doc = pipeline(" ".join(tokens))
    # align parser tokens to our word list by position in the joined text
    edges = []
    for token in doc:
        head = token.head
        if token.i != head.i and token.i < n and head.i < n:
            edges.append((min(token.i, head.i), max(token.i, head.i)))
    edges = sorted(set(edges))
    return edges if edges else chain_edges(n)
