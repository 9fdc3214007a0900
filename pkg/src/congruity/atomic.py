"""Atomic-level congruity: multi-head cross attention plus the
token-vs-patch similarity map and its importance-weighted score.

Text is always the query; the other modality (image patches, or knowledge
tokens in the knowledge branch) supplies keys and values. Each stacked
attention layer owns its parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import (Tensor, add, concat, layer_norm_rows, matmul, relu,
                     scale, softmax_rows, transpose)

LN_EPS = 1e-12


@dataclass
class AttentionHeadParams:
    w_query: Tensor  # (d, d/h)
    w_key: Tensor    # (d, d/h)
    w_value: Tensor  # (d, d/h)


@dataclass
class CrossAttentionParams:
    """One cross-attention layer: h heads, a post-concat two-layer MLP
    (d -> d -> d, ramp between), and layer-norm scale/shift."""

    heads: list[AttentionHeadParams]
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor
    ln_gamma: Tensor
    ln_beta: Tensor


@dataclass
class AtomicHeadParams:
    """Token-importance projection for the atomic score; the bias is a
    single broadcast scalar so the head is length-independent."""

    weight: Tensor  # (d, 1)
    bias: Tensor    # (1, 1)


def mca_layer(query: Tensor, keyval: Tensor, params: CrossAttentionParams,
              attention_sink: list | None = None) -> Tensor:
    """One cross-attention layer: scaled dot-product heads over the keyval
    rows, concatenated, passed through the MLP, residual-added to the
    query, and layer-normalized.

    ``attention_sink``, when given, receives a copy of each head's
    attention weight matrix (rows are queries and sum to 1).
    """
    d = query.shape[1]
    if keyval.shape[1] != d:
        raise ShapeError(f"query width {d} != key/value width {keyval.shape[1]}")
    h = len(params.heads)
    if d % h != 0:
        raise ConfigError(f"head count {h} does not divide width {d}")
    inv_sqrt_dh = 1.0 / math.sqrt(d / h)

    merged: Tensor | None = None
    for head in params.heads:
        q = matmul(query, head.w_query)
        k = matmul(keyval, head.w_key)
        v = matmul(keyval, head.w_value)
        weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dh))
        if attention_sink is not None:
            attention_sink.append(weights.data.copy())
        attended = matmul(weights, v)
        merged = attended if merged is None else concat(merged, attended, "cols")

    hidden = relu(add(matmul(merged, params.mlp_w1), params.mlp_b1))
    mixed = add(matmul(hidden, params.mlp_w2), params.mlp_b2)
    return layer_norm_rows(add(query, mixed), params.ln_gamma, params.ln_beta, LN_EPS)


def mca_stack(query: Tensor, keyval: Tensor, layers: list[CrossAttentionParams],
              attention_sink: list | None = None) -> Tensor:
    """Apply stacked cross-attention layers; keys/values stay fixed."""
    out = query
    for layer in layers:
        out = mca_layer(out, keyval, layer, attention_sink)
    return out


def atomic_similarity(text: Tensor, other: Tensor) -> Tensor:
    """Scaled inner products between every token and every patch/knowledge
    row: (n,d) x (r,d) -> (n,r), scaled by 1/sqrt(d)."""
    d = text.shape[1]
    if other.shape[1] != d:
        raise ShapeError(f"similarity widths differ: {text.shape} vs {other.shape}")
    return scale(matmul(text, transpose(other)), 1.0 / math.sqrt(d))


def token_importance(x: Tensor, head: AtomicHeadParams) -> Tensor:
    """Softmax importance over the rows of x, as a (1,n) row."""
    logits = transpose(add(matmul(x, head.weight), head.bias))
    return softmax_rows(logits)


def atomic_congruity(text: Tensor, similarity: Tensor, head: AtomicHeadParams) -> Tensor:
    """Importance-weighted combination of the similarity rows: a (1,r)
    score that is a convex combination of the rows of ``similarity``."""
    return matmul(token_importance(text, head), similarity)
