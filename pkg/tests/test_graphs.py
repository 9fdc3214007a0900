import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from congruity.errors import ConfigError, DataError
from congruity.graphs import build_grid_graph, build_text_graph


def test_single_edge_symmetrized():
    g = build_text_graph([(0, 1)], 2)
    assert g.neighbors == ((1,), (0,))


def test_duplicates_and_reversals_collapse():
    g = build_text_graph([(0, 1), (1, 0), (0, 1)], 2)
    assert g.neighbors == ((1,), (0,))


def test_empty_edges_isolated_nodes():
    g = build_text_graph([], 3)
    assert g.neighbors == ((), (), ())
    mask = g.adjacency_mask(include_self=True)
    assert np.array_equal(mask, np.eye(3))


def test_out_of_range_edge_errors():
    with pytest.raises(DataError):
        build_text_graph([(0, 5)], 3)


@given(st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=40),
    )))
def test_symmetry_and_dedup_hold_for_random_edge_lists(args):
    n, edges = args
    g = build_text_graph(edges, n)
    for i, nbrs in enumerate(g.neighbors):
        assert len(set(nbrs)) == len(nbrs)
        assert i not in nbrs
        for j in nbrs:
            assert i in g.neighbors[j]


def test_grid_p1():
    g = build_grid_graph(1)
    assert g.node_count == 1
    assert g.neighbors == ((),)


def test_grid_p2_exhaustive():
    g = build_grid_graph(2)
    # 2x2 lattice, row-major: 0-1, 0-2, 1-3, 2-3
    assert g.neighbors == ((1, 2), (0, 3), (0, 3), (1, 2))
    assert all(len(nbrs) == 2 for nbrs in g.neighbors)
    assert g.undirected_edge_count() == 4


def test_grid_p7_degree_census_and_edge_count():
    p = 7
    g = build_grid_graph(p)
    assert g.node_count == 49
    degrees = np.array([len(nbrs) for nbrs in g.neighbors])
    corners = [0, p - 1, p * (p - 1), p * p - 1]
    assert all(degrees[c] == 2 for c in corners)
    edge_nodes = [i for i in range(p * p)
                  if (i // p in (0, p - 1)) != (i % p in (0, p - 1))]
    assert all(degrees[i] == 3 for i in edge_nodes)
    interior = [i for i in range(p * p)
                if i // p not in (0, p - 1) and i % p not in (0, p - 1)]
    assert all(degrees[i] == 4 for i in interior)
    assert g.undirected_edge_count() == 2 * p * (p - 1)


@given(st.integers(min_value=3, max_value=9))
def test_grid_degrees_in_range(p):
    g = build_grid_graph(p)
    degrees = [len(nbrs) for nbrs in g.neighbors]
    assert set(degrees) <= {2, 3, 4}
    assert g.undirected_edge_count() == 2 * p * (p - 1)


def test_grid_eight_connectivity():
    g = build_grid_graph(2, connectivity=8)
    assert all(len(nbrs) == 3 for nbrs in g.neighbors)


def test_grid_invalid_side_errors():
    with pytest.raises(ConfigError):
        build_grid_graph(0)
    with pytest.raises(ConfigError):
        build_grid_graph(3, connectivity=5)
