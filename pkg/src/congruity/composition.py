"""Composition-level congruity: graph attention over the modality graphs,
the sentence embedding, and the group-vs-patch congruity score.

The graph attention layer uses a single attention head per layer and no
nonlinearity after aggregation; ``apply_nonlinearity`` can switch one on
for experimentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .graphs import ModalityGraph
from .tensor import (Tensor, add, concat, leaky_relu, masked_softmax_rows,
                     matmul, mean_of_rows, relu, scale, slice_rows,
                     softmax_rows, transpose)


@dataclass
class GatLayerParams:
    theta: Tensor        # (d, d) shared node projection
    attn: Tensor         # (2d, 1) attention vector over [theta x_i || theta x_j]
    slope: float = 0.2   # leaky-relu slope for attention scores


@dataclass
class SentenceParams:
    weight: Tensor  # (d, 1)
    bias: Tensor    # (1, 1) broadcast scalar


@dataclass
class CompositionHeadParams:
    weight: Tensor  # (d, 1)
    bias: Tensor    # (1, 1) broadcast scalar


def gat_layer(x: Tensor, graph: ModalityGraph, params: GatLayerParams,
              attention_sink: list | None = None,
              apply_nonlinearity: bool = False) -> Tensor:
    """One graph-attention update.

    For each node i, attention scores over j in N(i) plus i itself are
    leaky-relu(attn^T [theta x_i || theta x_j]), softmax-normalized within
    that neighborhood; the new feature is the attention-weighted sum of
    the projected neighbor features (self included).
    """
    k = x.shape[0]
    if graph.node_count != k:
        raise ShapeError(f"graph has {graph.node_count} nodes but features have {k} rows")
    d = x.shape[1]
    projected = matmul(x, params.theta)  # (k, d)
    # score(i,j) = leaky(src_i + dst_j) with src/dst the two halves of attn
    src = matmul(projected, slice_rows(params.attn, 0, d))
    dst = matmul(projected, slice_rows(params.attn, d, 2 * d))
    ones_row = Tensor(np.ones((1, k)))
    ones_col = Tensor(np.ones((k, 1)))
    raw = add(matmul(src, ones_row), matmul(ones_col, transpose(dst)))
    scores = leaky_relu(raw, params.slope)
    weights = masked_softmax_rows(scores, graph.adjacency_mask(include_self=True))
    if attention_sink is not None:
        attention_sink.append(weights.data.copy())
    out = matmul(weights, projected)
    return relu(out) if apply_nonlinearity else out


def gat_stack(x: Tensor, graph: ModalityGraph, layers: list[GatLayerParams],
              attention_sink: list | None = None) -> Tensor:
    out = x
    for layer in layers:
        out = gat_layer(out, graph, layer, attention_sink)
    return out


def sentence_embedding(weight_input: Tensor, values: Tensor,
                       params: SentenceParams | None, mode: str = "weighted") -> Tensor:
    """Pool token rows into a single (1,d) sentence vector.

    mode "weighted": softmax importance computed from ``weight_input`` applied
    to ``values``. mode "uniform": plain row average of ``values``
    (word averaging); params are unused and may be None.
    """
    if mode == "uniform":
        return mean_of_rows(values)
    if mode != "weighted":
        raise ConfigError(f"unknown sentence mode {mode!r}")
    if weight_input.shape[0] != values.shape[0]:
        raise ShapeError(
            f"sentence weight input rows {weight_input.shape} != value rows {values.shape}"
        )
    logits = transpose(add(matmul(weight_input, params.weight), params.bias))
    return matmul(softmax_rows(logits), values)


def node_importance(nodes: Tensor, params: CompositionHeadParams) -> Tensor:
    """Softmax importance over graph-propagated node rows, as (1, k)."""
    logits = transpose(add(matmul(nodes, params.weight), params.bias))
    return softmax_rows(logits)


def composition_similarity(nodes: Tensor, other: Tensor) -> Tensor:
    """Scaled inner products between composed nodes and the other
    modality's composed rows: (k,d) x (r,d) -> (k,r)."""
    d = nodes.shape[1]
    if other.shape[1] != d:
        raise ShapeError(f"similarity widths differ: {nodes.shape} vs {other.shape}")
    return scale(matmul(nodes, transpose(other)), 1.0 / math.sqrt(d))


def composition_congruity(text_nodes: Tensor, sentence: Tensor, other_nodes: Tensor,
                          params: CompositionHeadParams) -> Tensor:
    """Composition score: append the sentence vector as an extra node, take
    scaled similarities against the other modality, and combine rows by
    learned node importance. Returns a (1,r) score."""
    combined = concat(text_nodes, sentence, "rows")  # (n+1, d)
    similarity = composition_similarity(combined, other_nodes)
    return matmul(node_importance(combined, params), similarity)
