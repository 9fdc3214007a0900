"""Knowledge branch: treats an external token sequence (e.g. an image
caption) as a third modality and reuses the atomic and composition
machinery with its own parameter set.

The query side is the image-aligned text representation, so knowledge
interactions inherit information from all three modalities. The text-side
graph propagation reuses the text dependency graph (the only structure
available for text) with fresh parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .atomic import (AtomicHeadParams, CrossAttentionParams, atomic_congruity,
                     atomic_similarity, mca_stack, token_importance)
from .composition import (CompositionHeadParams, GatLayerParams,
                          SentenceParams, composition_congruity, gat_stack,
                          sentence_embedding)
from .graphs import ModalityGraph
from .tensor import Tensor


@dataclass
class KnowledgeParams:
    """A full second set of attention/graph parameters, disjoint from the
    text-image branch."""

    mca_layers: list[CrossAttentionParams]
    atomic_head: AtomicHeadParams
    text_gat: list[GatLayerParams]
    know_gat: list[GatLayerParams]
    sentence: SentenceParams | None
    composition_head: CompositionHeadParams


def knowledge_atomic(text_aligned: Tensor, knowledge: Tensor,
                     params: KnowledgeParams,
                     attention_sink: list | None = None) -> tuple[Tensor, Tensor]:
    """Cross-attend the aligned text onto the knowledge tokens and score
    their similarity. Returns (knowledge-aligned text (n,d), score (1,m))."""
    aligned = mca_stack(text_aligned, knowledge, params.mca_layers, attention_sink)
    similarity = atomic_similarity(aligned, knowledge)
    score = atomic_congruity(aligned, similarity, params.atomic_head)
    return aligned, score


def knowledge_composition(text_know_aligned: Tensor, knowledge: Tensor,
                          text_graph: ModalityGraph, know_graph: ModalityGraph,
                          params: KnowledgeParams, sentence_mode: str = "weighted",
                          sentence_weight_input: Tensor | None = None,
                          attention_sink: list | None = None) -> Tensor:
    """Composition-level score between graph-propagated text and knowledge.

    ``sentence_weight_input`` is the pre-alignment text for the sentence
    pooling weights; it defaults to the aligned text itself.
    """
    text_nodes = gat_stack(text_know_aligned, text_graph, params.text_gat, attention_sink)
    know_nodes = gat_stack(knowledge, know_graph, params.know_gat, attention_sink)
    weight_input = sentence_weight_input if sentence_weight_input is not None else text_know_aligned
    sentence = sentence_embedding(weight_input, text_know_aligned, params.sentence,
                                  sentence_mode)
    return composition_congruity(text_nodes, sentence, know_nodes,
                                 params.composition_head)
