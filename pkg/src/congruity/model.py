"""Model assembly: parameter construction per configuration, and the
per-sample forward pass that produces congruity scores, class
probabilities, and the training loss.

Parameters live in one flat name->Tensor dict (the unit of optimization
and checkpointing); small dataclass views over that dict are rebuilt on
demand for the layer functions. Which parameters exist depends on the
ablation mode and the knowledge switch, so parameter counts are exact per
mode:

* ``full``: atomic + composition scores, cross attention on.
* ``no_atomic``: drops the atomic score head (cross attention stays).
* ``no_mca_no_atomic``: additionally drops the text-image cross attention;
  the raw projected text feeds everything downstream.
* ``no_composition``: drops the graph stacks, sentence pooling, and
  composition score head.

Ablations act on both the text-image and the knowledge branch so the
classifier width stays predictable: (atomic? r) + (composition? r) plus,
with knowledge enabled, the same pattern over m_max knowledge slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomic import (AtomicHeadParams, AttentionHeadParams,
                     CrossAttentionParams, atomic_similarity, mca_stack,
                     token_importance)
from .composition import (CompositionHeadParams, GatLayerParams,
                          SentenceParams, composition_similarity, gat_stack,
                          node_importance, sentence_embedding)
from .config import Config
from .data import ProjectionMLP, Sample, project
from .errors import ConfigError, DataError
from .fusion import (CongruityBundle, FusionParams, knowledge_importance,
                     patch_importance, zero_fill)
from .graphs import build_grid_graph, build_text_graph
from .knowledge import KnowledgeParams
from .rng import derive_key, stream
from .tensor import (Tensor, add, concat, cross_entropy, dropout, matmul,
                     mul, softmax_rows)

GAT_SLOPE = 0.2


@dataclass(frozen=True)
class ModelDims:
    """Dataset-dependent dimensions the parameter shapes hang off."""

    d_text: int
    d_img: int
    d_know: int
    r: int
    m_max: int

    def to_dict(self) -> dict:
        return {"d_text": self.d_text, "d_img": self.d_img, "d_know": self.d_know,
                "r": self.r, "m_max": self.m_max}

    @classmethod
    def from_dict(cls, values: dict) -> "ModelDims":
        return cls(**{k: int(v) for k, v in values.items()})


def dims_from_samples(samples: list[Sample], config: Config) -> ModelDims:
    first = samples[0]
    d_know = 0
    for s in samples:
        if s.knowledge_embed is not None:
            d_know = s.knowledge_embed.shape[1]
            break
    return ModelDims(
        d_text=first.text_embed.shape[1],
        d_img=first.image_embed.shape[1],
        d_know=d_know,
        r=first.r,
        m_max=config.max_knowledge_len,
    )


def _gates(config: Config) -> tuple[bool, bool, bool]:
    """(atomic score on, text-image cross attention on, composition on)."""
    atomic_on = config.ablation in ("full", "no_composition")
    mca_on = config.ablation != "no_mca_no_atomic"
    comp_on = config.ablation != "no_composition"
    return atomic_on, mca_on, comp_on


def classifier_input_width(config: Config, dims: ModelDims) -> int:
    atomic_on, _, comp_on = _gates(config)
    width = dims.r * (int(atomic_on) + int(comp_on))
    if config.knowledge_enabled:
        width += dims.m_max * (int(atomic_on) + int(comp_on))
    return width


# ---------------------------------------------------------------------------
# parameter construction


def _glorot(name: str, rows: int, cols: int, seed: int) -> Tensor:
    std = np.sqrt(2.0 / (rows + cols))
    arr = stream(seed, f"init/{name}").normal(0.0, std, size=(rows, cols))
    return Tensor(arr, requires_grad=True)


def _zeros(rows: int, cols: int) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=True)


def _ones(rows: int, cols: int) -> Tensor:
    return Tensor(np.ones((rows, cols)), requires_grad=True)


def init_params(config: Config, dims: ModelDims) -> dict[str, Tensor]:
    """Build all trainable parameters for the configured model variant.

    Every parameter is initialized from its own named random stream, so
    the shared text-image parameters are bit-identical whether or not the
    knowledge branch exists.
    """
    config.validate()
    seed = config.seed
    d = config.d
    atomic_on, mca_on, comp_on = _gates(config)
    know_on = config.knowledge_enabled
    params: dict[str, Tensor] = {}

    def add_weight(name: str, rows: int, cols: int) -> None:
        params[name] = _glorot(name, rows, cols, seed)

    def add_projection(prefix: str, d_raw: int) -> None:
        add_weight(f"{prefix}.w1", d_raw, d)
        params[f"{prefix}.b1"] = _zeros(1, d)
        add_weight(f"{prefix}.w2", d, d)
        params[f"{prefix}.b2"] = _zeros(1, d)

    def add_mca(prefix: str, layer_count: int) -> None:
        for layer in range(layer_count):
            for head in range(config.h):
                add_weight(f"{prefix}.{layer}.h{head}.wq", d, d // config.h)
                add_weight(f"{prefix}.{layer}.h{head}.wk", d, d // config.h)
                add_weight(f"{prefix}.{layer}.h{head}.wv", d, d // config.h)
            add_weight(f"{prefix}.{layer}.mlp.w1", d, d)
            params[f"{prefix}.{layer}.mlp.b1"] = _zeros(1, d)
            add_weight(f"{prefix}.{layer}.mlp.w2", d, d)
            params[f"{prefix}.{layer}.mlp.b2"] = _zeros(1, d)
            params[f"{prefix}.{layer}.ln.gamma"] = _ones(1, d)
            params[f"{prefix}.{layer}.ln.beta"] = _zeros(1, d)

    def add_gat(prefix: str) -> None:
        for layer in range(config.gat_layers):
            add_weight(f"{prefix}.{layer}.theta", d, d)
            add_weight(f"{prefix}.{layer}.attn", 2 * d, 1)

    def add_head(prefix: str) -> None:
        add_weight(f"{prefix}.w", d, 1)
        params[f"{prefix}.b"] = _zeros(1, 1)

    add_projection("proj.text", dims.d_text)
    add_projection("proj.image", dims.d_img)
    if know_on:
        if dims.d_know <= 0:
            raise ConfigError("knowledge branch enabled but dataset has no knowledge width")
        add_projection("proj.know", dims.d_know)

    if mca_on:
        add_mca("mca_ti", config.mca_layers_text_image)
    if atomic_on:
        add_head("atomic")
    if comp_on:
        add_gat("gat_text")
        add_gat("gat_image")
        if config.sentence_mode == "weighted":
            add_head("sentence")
        add_head("comp")

    if know_on:
        add_mca("mca_tk", config.mca_layers_text_knowledge)
        if atomic_on:
            add_head("atomic_k")
        if comp_on:
            add_gat("gat_text_k")
            add_gat("gat_know")
            if config.sentence_mode == "weighted":
                add_head("sentence_k")
            add_head("comp_k")
        add_head("fusion.know")

    add_head("fusion.patch")
    width = classifier_input_width(config, dims)
    add_weight("fusion.out_w", width, 2)
    params["fusion.out_b"] = _zeros(1, 2)
    return params


def count_params(params: dict[str, Tensor]) -> int:
    return sum(p.data.size for p in params.values())


# ---------------------------------------------------------------------------
# dataclass views over the flat dict


def _mca_views(params: dict[str, Tensor], prefix: str, layer_count: int,
               h: int) -> list[CrossAttentionParams]:
    views = []
    for layer in range(layer_count):
        heads = [AttentionHeadParams(
            w_query=params[f"{prefix}.{layer}.h{i}.wq"],
            w_key=params[f"{prefix}.{layer}.h{i}.wk"],
            w_value=params[f"{prefix}.{layer}.h{i}.wv"],
        ) for i in range(h)]
        views.append(CrossAttentionParams(
            heads=heads,
            mlp_w1=params[f"{prefix}.{layer}.mlp.w1"],
            mlp_b1=params[f"{prefix}.{layer}.mlp.b1"],
            mlp_w2=params[f"{prefix}.{layer}.mlp.w2"],
            mlp_b2=params[f"{prefix}.{layer}.mlp.b2"],
            ln_gamma=params[f"{prefix}.{layer}.ln.gamma"],
            ln_beta=params[f"{prefix}.{layer}.ln.beta"],
        ))
    return views


def _gat_views(params: dict[str, Tensor], prefix: str, layer_count: int) -> list[GatLayerParams]:
    return [GatLayerParams(theta=params[f"{prefix}.{i}.theta"],
                           attn=params[f"{prefix}.{i}.attn"], slope=GAT_SLOPE)
            for i in range(layer_count)]


def _projection_view(params: dict[str, Tensor], prefix: str) -> ProjectionMLP:
    return ProjectionMLP(w1=params[f"{prefix}.w1"], b1=params[f"{prefix}.b1"],
                         w2=params[f"{prefix}.w2"], b2=params[f"{prefix}.b2"])


@dataclass
class ModelViews:
    proj_text: ProjectionMLP
    proj_image: ProjectionMLP
    proj_know: ProjectionMLP | None
    mca_ti: list[CrossAttentionParams]
    atomic: AtomicHeadParams | None
    gat_text: list[GatLayerParams]
    gat_image: list[GatLayerParams]
    sentence: SentenceParams | None
    comp: CompositionHeadParams | None
    fusion: FusionParams
    knowledge: KnowledgeParams | None


def build_views(params: dict[str, Tensor], config: Config) -> ModelViews:
    atomic_on, mca_on, comp_on = _gates(config)
    know_on = config.knowledge_enabled
    weighted = config.sentence_mode == "weighted"
    knowledge = None
    if know_on:
        knowledge = KnowledgeParams(
            mca_layers=_mca_views(params, "mca_tk", config.mca_layers_text_knowledge, config.h),
            atomic_head=AtomicHeadParams(params["atomic_k.w"], params["atomic_k.b"])
            if atomic_on else None,
            text_gat=_gat_views(params, "gat_text_k", config.gat_layers) if comp_on else [],
            know_gat=_gat_views(params, "gat_know", config.gat_layers) if comp_on else [],
            sentence=SentenceParams(params["sentence_k.w"], params["sentence_k.b"])
            if comp_on and weighted else None,
            composition_head=CompositionHeadParams(params["comp_k.w"], params["comp_k.b"])
            if comp_on else None,
        )
    return ModelViews(
        proj_text=_projection_view(params, "proj.text"),
        proj_image=_projection_view(params, "proj.image"),
        proj_know=_projection_view(params, "proj.know") if know_on else None,
        mca_ti=_mca_views(params, "mca_ti", config.mca_layers_text_image, config.h)
        if mca_on else [],
        atomic=AtomicHeadParams(params["atomic.w"], params["atomic.b"]) if atomic_on else None,
        gat_text=_gat_views(params, "gat_text", config.gat_layers) if comp_on else [],
        gat_image=_gat_views(params, "gat_image", config.gat_layers) if comp_on else [],
        sentence=SentenceParams(params["sentence.w"], params["sentence.b"])
        if comp_on and weighted else None,
        comp=CompositionHeadParams(params["comp.w"], params["comp.b"]) if comp_on else None,
        fusion=FusionParams(
            patch_weight=params["fusion.patch.w"], patch_bias=params["fusion.patch.b"],
            out_weight=params["fusion.out_w"], out_bias=params["fusion.out_b"],
            know_weight=params.get("fusion.know.w"), know_bias=params.get("fusion.know.b"),
        ),
        knowledge=knowledge,
    )


# ---------------------------------------------------------------------------
# forward


@dataclass
class ForwardResult:
    loss: Tensor
    probs: Tensor
    bundle: CongruityBundle


def forward_sample(params: dict[str, Tensor], sample: Sample, config: Config,
                   dims: ModelDims, training: bool = False, step: int = 0,
                   attention_sink: list | None = None,
                   dropout_overrides: dict[str, float] | None = None) -> ForwardResult:
    """Run one sample through the configured model variant.

    Dropout sites ("proj.text", "proj.image", "proj.know", "classifier")
    use ``config.dropout`` unless overridden per site via
    ``dropout_overrides``. Masks come from streams keyed by (seed, site +
    sample id, step), so a sample's loss does not depend on which batch it
    sits in.
    """
    if sample.r != dims.r:
        raise DataError(f"sample {sample.id!r}: r={sample.r} but model was built for r={dims.r}")
    atomic_on, mca_on, comp_on = _gates(config)
    know_on = config.knowledge_enabled
    views = build_views(params, config)
    seed = config.seed

    def drop(x: Tensor, site: str) -> Tensor:
        rate = config.dropout
        if dropout_overrides is not None:
            rate = dropout_overrides.get(site, rate)
        return dropout(x, rate, training, derive_key(seed, f"drop/{site}/{sample.id}", step))

    text_raw = drop(project(Tensor(sample.text_embed), views.proj_text), "proj.text")
    image = drop(project(Tensor(sample.image_embed), views.proj_image), "proj.image")

    knowledge = None
    if know_on:
        if sample.knowledge_embed is None:
            raise DataError(
                f"sample {sample.id!r}: knowledge branch enabled but sample has no knowledge tokens"
            )
        if sample.m > dims.m_max:
            raise DataError(
                f"sample {sample.id!r}: m={sample.m} exceeds configured maximum {dims.m_max}"
            )
        knowledge = drop(project(Tensor(sample.knowledge_embed), views.proj_know), "proj.know")

    text_aligned = mca_stack(text_raw, image, views.mca_ti, attention_sink) \
        if mca_on else text_raw

    bundle_fields: dict = {}
    atomic_score = None
    if atomic_on:
        similarity = atomic_similarity(text_aligned, image)
        weights = token_importance(text_aligned, views.atomic)
        atomic_score = matmul(weights, similarity)
        bundle_fields.update(
            atomic_similarity=similarity.data.copy(),
            token_weights=weights.data[0].copy(),
            atomic_scores=atomic_score.data[0].copy(),
        )

    comp_score = None
    if comp_on:
        text_graph = build_text_graph(sample.text_edges, sample.n)
        grid_graph = build_grid_graph(sample.grid_side, config.grid_connectivity)
        text_nodes = gat_stack(text_aligned, text_graph, views.gat_text, attention_sink)
        image_nodes = gat_stack(image, grid_graph, views.gat_image, attention_sink)
        weight_input = text_raw if config.sentence_weights == "raw" else text_aligned
        sentence = sentence_embedding(weight_input, text_aligned, views.sentence,
                                      config.sentence_mode)
        combined = concat(text_nodes, sentence, "rows")
        comp_sim = composition_similarity(combined, image_nodes)
        comp_weights = node_importance(combined, views.comp)
        comp_score = matmul(comp_weights, comp_sim)
        bundle_fields.update(
            composition_similarity=comp_sim.data.copy(),
            composition_node_weights=comp_weights.data[0].copy(),
            composition_scores=comp_score.data[0].copy(),
        )

    know_atomic_score = know_comp_score = None
    if know_on:
        kp = views.knowledge
        text_know = mca_stack(text_aligned, knowledge, kp.mca_layers, attention_sink)
        if atomic_on:
            know_sim = atomic_similarity(text_know, knowledge)
            know_tok_weights = token_importance(text_know, kp.atomic_head)
            know_atomic_score = matmul(know_tok_weights, know_sim)
            bundle_fields.update(
                know_atomic_similarity=know_sim.data.copy(),
                know_token_weights=know_tok_weights.data[0].copy(),
                know_atomic_scores=know_atomic_score.data[0].copy(),
            )
        if comp_on:
            text_graph = build_text_graph(sample.text_edges, sample.n)
            know_graph = build_text_graph(sample.knowledge_edges or (), sample.m)
            know_text_nodes = gat_stack(text_know, text_graph, kp.text_gat, attention_sink)
            know_nodes = gat_stack(knowledge, know_graph, kp.know_gat, attention_sink)
            k_weight_input = text_aligned if config.sentence_weights == "raw" else text_know
            know_sentence = sentence_embedding(k_weight_input, text_know, kp.sentence,
                                               config.sentence_mode)
            know_combined = concat(know_text_nodes, know_sentence, "rows")
            know_comp_sim = composition_similarity(know_combined, know_nodes)
            know_comp_weights = node_importance(know_combined, kp.composition_head)
            know_comp_score = matmul(know_comp_weights, know_comp_sim)
            bundle_fields.update(
                know_composition_similarity=know_comp_sim.data.copy(),
                know_composition_node_weights=know_comp_weights.data[0].copy(),
                know_composition_scores=know_comp_score.data[0].copy(),
            )

    patch_weights = patch_importance(image, views.fusion)
    parts = [mul(patch_weights, s) for s in (atomic_score, comp_score) if s is not None]
    know_weights = None
    if know_on:
        know_weights = knowledge_importance(knowledge, views.fusion)
        parts += [zero_fill(mul(know_weights, s), dims.m_max)
                  for s in (know_atomic_score, know_comp_score) if s is not None]
    features = parts[0]
    for part in parts[1:]:
        features = concat(features, part, "cols")
    features = drop(features, "classifier")
    logits = add(matmul(features, views.fusion.out_weight), views.fusion.out_bias)
    probs = softmax_rows(logits)
    loss = cross_entropy(probs, sample.label)

    bundle = CongruityBundle(
        probs=probs.data[0].copy(),
        patch_weights=patch_weights.data[0].copy(),
        know_weights=know_weights.data[0].copy() if know_weights is not None else None,
        **bundle_fields,
    )
    return ForwardResult(loss=loss, probs=probs, bundle=bundle)
