"""Fusing congruity scores into class probabilities and the training loss.

The classifier consumes patch-importance-weighted atomic and composition
scores; with the knowledge branch enabled it also consumes the knowledge
scores, zero-filled up to the configured maximum knowledge length so the
classifier width is independent of the per-sample knowledge count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .tensor import (Tensor, add, concat, cross_entropy, matmul, mul,
                     softmax_rows, transpose)

__all__ = [
    "FusionParams", "CongruityBundle", "patch_importance", "sequence_importance",
    "zero_fill", "fuse_predict", "fuse_predict_with_knowledge", "cross_entropy",
]


@dataclass
class FusionParams:
    patch_weight: Tensor           # (d, 1)
    patch_bias: Tensor             # (1, 1) broadcast scalar
    out_weight: Tensor             # (feature_width, 2)
    out_bias: Tensor               # (1, 2)
    know_weight: Tensor | None = None  # (d, 1)
    know_bias: Tensor | None = None    # (1, 1)


@dataclass
class CongruityBundle:
    """Per-sample forward outputs: scores, importance vectors, class
    probabilities, and the similarity maps they were derived from."""

    probs: np.ndarray                              # (2,)
    patch_weights: np.ndarray                      # (r,)
    atomic_scores: np.ndarray | None = None        # (r,)
    composition_scores: np.ndarray | None = None   # (r,)
    know_atomic_scores: np.ndarray | None = None   # (m,)
    know_composition_scores: np.ndarray | None = None  # (m,)
    know_weights: np.ndarray | None = None         # (m,)
    atomic_similarity: np.ndarray | None = None    # (n, r)
    token_weights: np.ndarray | None = None        # (n,)
    composition_similarity: np.ndarray | None = None   # (n+1, r)
    composition_node_weights: np.ndarray | None = None  # (n+1,)
    know_atomic_similarity: np.ndarray | None = None    # (n, m)
    know_token_weights: np.ndarray | None = None        # (n,)
    know_composition_similarity: np.ndarray | None = None   # (n+1, m)
    know_composition_node_weights: np.ndarray | None = None  # (n+1,)


def sequence_importance(rows: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Softmax importance over the rows of a (k,d) sequence, as (1,k)."""
    return softmax_rows(transpose(add(matmul(rows, weight), bias)))


def patch_importance(image: Tensor, params: FusionParams) -> Tensor:
    """Importance of each raw projected patch, a (1,r) distribution."""
    return sequence_importance(image, params.patch_weight, params.patch_bias)


def knowledge_importance(knowledge: Tensor, params: FusionParams) -> Tensor:
    """Importance of each knowledge token, a (1,m) distribution."""
    return sequence_importance(knowledge, params.know_weight, params.know_bias)


def zero_fill(row: Tensor, width: int) -> Tensor:
    """Right-pad a (1,m) row with zeros up to (1,width)."""
    m = row.shape[1]
    if m > width:
        raise DataError(f"knowledge length {m} exceeds configured maximum {width}")
    if m == width:
        return row
    return concat(row, Tensor(np.zeros((1, width - m))), "cols")


def _classify(features: Tensor, params: FusionParams) -> Tensor:
    if features.shape[1] != params.out_weight.shape[0]:
        raise ShapeError(
            f"classifier expects width {params.out_weight.shape[0]}, got {features.shape[1]}"
        )
    return softmax_rows(add(matmul(features, params.out_weight), params.out_bias))


def fuse_predict(atomic_scores: Tensor | None, composition_scores: Tensor | None,
                 patch_weights: Tensor, params: FusionParams) -> Tensor:
    """Class probabilities from the text-image scores. Either score may be
    absent under an ablation; at least one must be present."""
    parts = [mul(patch_weights, s) for s in (atomic_scores, composition_scores)
             if s is not None]
    if not parts:
        raise ShapeError("fuse_predict needs at least one congruity score")
    features = parts[0]
    for part in parts[1:]:
        features = concat(features, part, "cols")
    return _classify(features, params)


def fuse_predict_with_knowledge(atomic_scores: Tensor | None,
                                composition_scores: Tensor | None,
                                know_atomic_scores: Tensor | None,
                                know_composition_scores: Tensor | None,
                                patch_weights: Tensor, know_weights: Tensor,
                                params: FusionParams, m_max: int) -> Tensor:
    """Knowledge-extended classifier; knowledge score slots beyond the
    sample's knowledge length are zero-filled up to ``m_max``."""
    parts = [mul(patch_weights, s) for s in (atomic_scores, composition_scores)
             if s is not None]
    parts += [zero_fill(mul(know_weights, s), m_max)
              for s in (know_atomic_scores, know_composition_scores) if s is not None]
    if not parts:
        raise ShapeError("fuse_predict_with_knowledge needs at least one congruity score")
    features = parts[0]
    for part in parts[1:]:
        features = concat(features, part, "cols")
    return _classify(features, params)
