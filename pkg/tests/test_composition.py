import numpy as np
import pytest

import reference
from congruity.composition import (CompositionHeadParams, GatLayerParams,
                                   SentenceParams, composition_congruity,
                                   composition_similarity, gat_layer,
                                   gat_stack, node_importance,
                                   sentence_embedding)
from congruity.errors import ShapeError
from congruity.graphs import ModalityGraph, build_grid_graph, build_text_graph
from congruity.tensor import Tensor


def _gat_params(rng, d):
    return GatLayerParams(theta=Tensor(rng.normal(size=(d, d))),
                          attn=Tensor(rng.normal(size=(2 * d, 1))))


def test_isolated_node_self_attention_is_one(rng):
    d = 5
    params = _gat_params(rng, d)
    g = build_text_graph([], 1)
    x = rng.normal(size=(1, d))
    sink = []
    out = gat_layer(Tensor(x), g, params, sink)
    assert np.allclose(sink[0], [[1.0]])
    np.testing.assert_allclose(out.data, x @ params.theta.data, atol=1e-12)


def test_two_identical_nodes_share_attention(rng):
    d = 5
    params = _gat_params(rng, d)
    g = build_text_graph([(0, 1)], 2)
    row = rng.normal(size=(1, d))
    x = np.vstack([row, row])
    sink = []
    out = gat_layer(Tensor(x), g, params, sink)
    np.testing.assert_allclose(sink[0], np.full((2, 2), 0.5), atol=1e-12)
    np.testing.assert_allclose(out.data, x @ params.theta.data, atol=1e-12)


def test_gat_layer_matches_per_node_reference(rng):
    d = 6
    params = _gat_params(rng, d)
    g = build_text_graph([(0, 1), (1, 2), (2, 3)], 4)  # path graph
    x = rng.normal(size=(4, d))
    got = gat_layer(Tensor(x), g, params)
    expected = reference.gat_layer(x, g.neighbors, params.theta.data, params.attn.data)
    np.testing.assert_allclose(got.data, expected, atol=1e-12)


def test_gat_layer_matches_reference_on_grid(rng):
    d = 4
    params = _gat_params(rng, d)
    g = build_grid_graph(3)
    x = rng.normal(size=(9, d))
    got = gat_layer(Tensor(x), g, params)
    expected = reference.gat_layer(x, g.neighbors, params.theta.data, params.attn.data)
    np.testing.assert_allclose(got.data, expected, atol=1e-12)


def test_gat_attention_sums_to_one_over_neighborhood(rng):
    d = 6
    params = _gat_params(rng, d)
    g = build_text_graph([(0, 1), (1, 2), (0, 3), (3, 4)], 5)
    sink = []
    gat_layer(Tensor(rng.normal(size=(5, d))), g, params, sink)
    np.testing.assert_allclose(sink[0].sum(axis=1), 1.0, atol=1e-12)
    # support is exactly the neighborhood plus self
    mask = g.adjacency_mask(include_self=True)
    assert ((sink[0] > 0) == (mask > 0)).all()


def test_gat_permutation_equivariance(rng):
    d = 6
    k = 7
    params = _gat_params(rng, d)
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 4)]
    g = build_text_graph(edges, k)
    x = rng.normal(size=(k, d))
    perm = rng.permutation(k)
    relabeled = build_text_graph([(int(perm[i]), int(perm[j])) for i, j in edges], k)
    base = gat_layer(Tensor(x), g, params).data
    permuted = gat_layer(Tensor(x[np.argsort(perm)]), relabeled, params).data
    assert np.abs(permuted[perm][np.argsort(perm)] - base[np.argsort(perm)]).max() < 1e-9


def test_gat_complete_graph_identical_features_uniform(rng):
    d = 5
    k = 6
    params = _gat_params(rng, d)
    edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    g = build_text_graph(edges, k)
    row = rng.normal(size=(1, d))
    x = np.repeat(row, k, axis=0)
    out = gat_layer(Tensor(x), g, params).data
    expected = row @ params.theta.data
    assert np.abs(out - expected).max() < 1e-10


def test_gat_stack_composes_without_shape_change(rng):
    d = 6
    layers = [_gat_params(rng, d), _gat_params(rng, d)]
    g = build_grid_graph(2)
    out = gat_stack(Tensor(rng.normal(size=(4, d))), g, layers)
    assert out.shape == (4, d)


def test_gat_node_count_mismatch(rng):
    with pytest.raises(ShapeError):
        gat_layer(Tensor(rng.normal(size=(3, 4))), build_grid_graph(2),
                  _gat_params(rng, 4))


def test_sentence_embedding_single_row_both_modes(rng):
    d = 4
    params = SentenceParams(weight=Tensor(rng.normal(size=(d, 1))),
                            bias=Tensor(rng.normal(size=(1, 1))))
    raw = Tensor(rng.normal(size=(1, d)))
    values = Tensor(rng.normal(size=(1, d)))
    np.testing.assert_allclose(sentence_embedding(raw, values, params, "weighted").data,
                               values.data, atol=1e-15)
    np.testing.assert_allclose(sentence_embedding(raw, values, None, "uniform").data,
                               values.data, atol=1e-15)


def test_sentence_embedding_zero_weights_average(rng):
    d = 4
    params = SentenceParams(weight=Tensor(np.zeros((d, 1))), bias=Tensor(np.zeros((1, 1))))
    raw = Tensor(rng.normal(size=(3, d)))
    values = Tensor(rng.normal(size=(3, d)))
    np.testing.assert_allclose(sentence_embedding(raw, values, params, "weighted").data,
                               values.data.mean(axis=0, keepdims=True), atol=1e-15)


def test_sentence_embedding_uniform_mode_hand_case():
    values = Tensor([[1.0, 3.0], [3.0, 5.0]])
    out = sentence_embedding(values, values, None, "uniform")
    np.testing.assert_allclose(out.data, [[2.0, 4.0]])


def test_sentence_embedding_weights_come_from_first_argument(rng):
    d = 4
    params = SentenceParams(weight=Tensor(rng.normal(size=(d, 1))),
                            bias=Tensor(np.zeros((1, 1))))
    raw = rng.normal(size=(3, d))
    values = rng.normal(size=(3, d))
    got = sentence_embedding(Tensor(raw), Tensor(values), params, "weighted").data
    expected = reference.sentence_weighted(raw, values, params.weight.data, params.bias.data[0, 0])
    np.testing.assert_allclose(got, expected, atol=1e-14)


def test_composition_congruity_uniform_head_averages(rng):
    d = 4
    params = CompositionHeadParams(weight=Tensor(np.zeros((d, 1))),
                                   bias=Tensor(np.zeros((1, 1))))
    nodes = Tensor(rng.normal(size=(1, d)))
    sentence = Tensor(rng.normal(size=(1, d)))
    other = Tensor(rng.normal(size=(1, d)))
    out = composition_congruity(nodes, sentence, other, params)
    sim = composition_similarity(Tensor(np.vstack([nodes.data, sentence.data])), other)
    np.testing.assert_allclose(out.data, sim.data.mean(axis=0, keepdims=True), atol=1e-14)


def test_composition_congruity_zero_other_is_zero(rng):
    d = 4
    params = CompositionHeadParams(weight=Tensor(rng.normal(size=(d, 1))),
                                   bias=Tensor(np.zeros((1, 1))))
    out = composition_congruity(Tensor(rng.normal(size=(2, d))),
                                Tensor(rng.normal(size=(1, d))),
                                Tensor(np.zeros((3, d))), params)
    assert np.array_equal(out.data, np.zeros((1, 3)))


def test_composition_congruity_convexity(rng):
    d = 6
    for _ in range(25):
        n, r = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        params = CompositionHeadParams(weight=Tensor(rng.normal(size=(d, 1))),
                                       bias=Tensor(rng.normal(size=(1, 1))))
        nodes = rng.normal(size=(n, d))
        sentence = rng.normal(size=(1, d))
        other = rng.normal(size=(r, d))
        out = composition_congruity(Tensor(nodes), Tensor(sentence),
                                    Tensor(other), params).data[0]
        sim = np.vstack([nodes, sentence]) @ other.T / np.sqrt(d)
        assert ((out >= sim.min(axis=0) - 1e-12) & (out <= sim.max(axis=0) + 1e-12)).all()


def test_composition_congruity_matches_reference(rng):
    d = 6
    params = CompositionHeadParams(weight=Tensor(rng.normal(size=(d, 1))),
                                   bias=Tensor(rng.normal(size=(1, 1))))
    nodes = rng.normal(size=(3, d))
    sentence = rng.normal(size=(1, d))
    other = rng.normal(size=(4, d))
    got = composition_congruity(Tensor(nodes), Tensor(sentence), Tensor(other), params)
    expected = reference.composition_score(nodes, sentence, other,
                                           params.weight.data, params.bias.data[0, 0])
    np.testing.assert_allclose(got.data, expected, atol=1e-13)
