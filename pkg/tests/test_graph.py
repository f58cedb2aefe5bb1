import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphacl.graph import (
    SparseMatrix,
    SyntheticSpec,
    build_graph,
    generate_synthetic,
    normalized_adjacency,
    random_splits,
    two_hop_graph,
)
from graphacl.metrics import homophily_ratio, two_hop_monophily

from .conftest import random_graph


def test_single_edge():
    g = build_graph([(0, 1)], 2)
    assert g.row_offsets.tolist() == [0, 1, 2]
    assert g.col_indices.tolist() == [1, 0]


def test_duplicates_and_self_loops_dropped():
    g = build_graph([(0, 1), (1, 0), (1, 1)], 2)
    assert g.row_offsets.tolist() == [0, 1, 2]
    assert g.col_indices.tolist() == [1, 0]


def test_triangle_plus_isolated(triangle_plus_isolated):
    g = triangle_plus_isolated
    assert g.degrees.tolist() == [2, 2, 2, 0]
    assert g.neighbors(0).tolist() == [1, 2]
    assert g.num_edges == 3


def test_build_graph_errors():
    with pytest.raises(ValueError, match="out of range"):
        build_graph([(0, 5)], 3)
    with pytest.raises(ValueError, match="declared class count"):
        build_graph([(0, 1)], 2, labels=[0, 3], num_classes=2)


def test_graph_is_immutable():
    g = build_graph([(0, 1)], 2)
    with pytest.raises(ValueError):
        g.col_indices[0] = 5


edge_lists = st.integers(2, 20).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))
)


@given(edge_lists)
@settings(max_examples=60, deadline=None)
def test_structural_invariants(data):
    n, edges = data
    g = build_graph(edges, n)
    a = g.to_dense()
    np.testing.assert_array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert np.all(np.diff(g.row_offsets) >= 0)
    for v in range(n):
        assert np.all(np.diff(g.neighbors(v)) > 0)
    expect = np.zeros((n, n))
    for u, v in edges:
        if u != v:
            expect[u, v] = expect[v, u] = 1
    np.testing.assert_array_equal(a, expect)


def test_normalized_adjacency_examples(path3, triangle_plus_isolated):
    assert normalized_adjacency(build_graph([(0, 1)], 2)).values.tolist() == [1.0, 1.0]
    a = normalized_adjacency(path3).to_dense()
    assert a[0, 1] == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert a[1, 2] == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    np.testing.assert_array_equal(a, a.T)
    t = normalized_adjacency(triangle_plus_isolated)
    np.testing.assert_allclose(t.values, 0.5, rtol=0, atol=1e-15)
    assert t.values.shape == (6,)
    assert t.row_offsets[3] == t.row_offsets[4]


@pytest.mark.parametrize("seed", range(5))
def test_normalized_adjacency_spectral_radius(seed):
    g = random_graph(200, 0.03, seed)
    a = normalized_adjacency(g).to_dense()
    x = np.random.default_rng(seed).standard_normal(200)
    rho = 0.0
    for _ in range(500):
        y = a @ (a @ x)
        rho = np.linalg.norm(y) / np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    # power iteration on A^2 gives rho(A)^2
    assert np.sqrt(rho) <= 1 + 1e-9


def test_two_hop_examples(path3):
    assert two_hop_graph(path3).edge_array().tolist() == [[0, 2]]
    assert two_hop_graph(build_graph([(0, 1)], 2)).num_edges == 0
    cycle = build_graph([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    assert two_hop_graph(cycle).edge_array().tolist() == [[0, 2], [1, 3]]


def test_two_hop_keeps_one_hop_pairs_and_labels():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3, labels=[0, 1, 0])
    g2 = two_hop_graph(g)
    assert g2.edge_array().tolist() == [[0, 1], [0, 2], [1, 2]]
    assert g2.labels.tolist() == [0, 1, 0]


@pytest.mark.parametrize("seed", range(4))
def test_two_hop_equals_boolean_square(seed):
    g = random_graph(64, 0.06, seed)
    a = g.to_dense()
    expect = (a @ a) > 0
    np.fill_diagonal(expect, False)
    np.testing.assert_array_equal(two_hop_graph(g).to_dense() > 0, expect)


def test_sparse_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        SparseMatrix(np.array([0, 1]), np.array([0]), np.array([np.nan]))


def test_synthetic_monophily_graph():
    spec = SyntheticSpec("heterophilic-bipartite-monophily", 40, 2, p_in=0.0, p_out=1.0)
    g, x = generate_synthetic(spec, 3)
    assert homophily_ratio(g) == 0.0
    assert two_hop_monophily(g) == 1.0
    assert x.shape == (40, spec.feature_dim)


def test_synthetic_four_class_monophily():
    spec = SyntheticSpec("heterophilic-bipartite-monophily", 200, 4, p_in=0.0, p_out=0.1)
    g, _ = generate_synthetic(spec, 1)
    assert homophily_ratio(g) == 0.0
    assert two_hop_monophily(g) == 1.0


def test_synthetic_pure_homophily():
    spec = SyntheticSpec("homophilic-sbm", 30, 2, p_in=1.0, p_out=0.0)
    g, _ = generate_synthetic(spec, 0)
    assert homophily_ratio(g) == 1.0


def test_synthetic_reproducible():
    spec = SyntheticSpec("homophilic-sbm", 50, 3, 0.3, 0.05, feature_dim=8, feature_noise=0.5)
    g1, x1 = generate_synthetic(spec, 42)
    g2, x2 = generate_synthetic(spec, 42)
    np.testing.assert_array_equal(g1.col_indices, g2.col_indices)
    np.testing.assert_array_equal(g1.labels, g2.labels)
    assert x1.tobytes() == x2.tobytes()
    _, x3 = generate_synthetic(spec, 43)
    assert x1.tobytes() != x3.tobytes()


def test_synthetic_features_low_dim_projection():
    spec = SyntheticSpec("homophilic-sbm", 20, 4, 0.5, 0.1, feature_dim=2, feature_noise=0.0)
    _, x = generate_synthetic(spec, 0)
    assert x.shape == (20, 2)


@pytest.mark.parametrize("kwargs", [
    dict(p_in=1.5),
    dict(num_classes=1),
    dict(num_nodes=2, num_classes=3),
    dict(kind="ring"),
    dict(kind="heterophilic-bipartite-monophily", num_classes=3),
    dict(feature_noise=-1.0),
])
def test_synthetic_spec_validation(kwargs):
    base = dict(kind="homophilic-sbm", num_nodes=10, num_classes=2, p_in=0.5, p_out=0.1)
    base.update(kwargs)
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(**base), 0)


def test_random_splits_disjoint():
    s = random_splits(101, 0)
    allidx = np.concatenate([s["train"], s["val"], s["test"]])
    assert sorted(allidx.tolist()) == list(range(101))
