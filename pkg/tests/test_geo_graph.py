import math

import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from TVGS.errors import DegenerateKernelError, InvalidParameterError
from TVGS.geo_graph import (
    EARTH_RADIUS_KM,
    NodeTable,
    build_geo_graph,
    gaussian_weights,
    kernel_sigma,
    knn_edges,
    laplacian,
    pairwise_distances,
    read_edge_list,
    write_edge_list,
)

from conftest import random_nodes


def line_nodes(longitudes):
    return NodeTable(coords=np.column_stack([np.zeros(len(longitudes)), longitudes]))


def test_ties_go_to_lower_index():
    edges = knn_edges(line_nodes([0.0, 1.0, 2.0, 3.0]), k=1)
    assert edges.pairs() == {(0, 1), (1, 2), (2, 3)}


def test_union_symmetrization():
    edges = knn_edges(line_nodes([0.0, 1.0, 10.0]), k=1)
    assert edges.pairs() == {(0, 1), (1, 2)}
    assert np.all(edges.i < edges.j)


def test_every_node_keeps_k_neighbors(rng):
    nodes = random_nodes(rng, 40)
    graph = build_geo_graph(nodes, k=5)
    degree_counts = np.diff(graph.adjacency.indptr)
    assert degree_counts.min() >= 5


@pytest.mark.parametrize("k", [0, 3, 7])
def test_k_out_of_range(k):
    with pytest.raises(InvalidParameterError):
        knn_edges(line_nodes([0.0, 1.0, 2.0]), k=k)


def test_kernel_sigma_and_weights():
    edges = knn_edges(line_nodes([0.0, 1.0, 3.0]), k=1)
    assert edges.edges == [(0, 1, 1.0), (1, 2, 2.0)]
    sigma = kernel_sigma(edges)
    assert sigma == pytest.approx(3.0 / 5.0)

    W = gaussian_weights(edges, sigma).toarray()
    assert W[0, 1] == pytest.approx(math.exp(-(1.0 / sigma) ** 2))
    assert W[1, 2] == pytest.approx(math.exp(-(2.0 / sigma) ** 2))
    assert W[0, 2] == 0.0
    assert_allclose(W, W.T)


def test_weights_positive_on_every_edge():
    edges = knn_edges(line_nodes([0.0, 0.001, 100.0]), k=1)
    W = gaussian_weights(edges, kernel_sigma(edges))
    assert np.all(W.data > 0.0)
    assert W.nnz == 2 * len(edges)


def test_laplacian_properties(rng):
    graph = build_geo_graph(random_nodes(rng, 30), k=4)
    L = graph.laplacian.toarray()
    assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    assert_allclose(L, L.T)
    assert np.linalg.eigvalsh(L).min() > -1e-10
    assert_allclose(np.diag(L), graph.degree)


def test_laplacian_rejects_bad_adjacency():
    with pytest.raises(InvalidParameterError):
        laplacian(sp.csr_matrix(np.array([[0.0, 1.0], [0.5, 0.0]])))
    with pytest.raises(InvalidParameterError):
        laplacian(sp.csr_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]])))
    with pytest.raises(InvalidParameterError):
        laplacian(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 0.0]])))


def test_haversine_degree_at_equator():
    d = pairwise_distances(np.array([[0.0, 0.0]]), np.array([[0.0, 1.0]]), metric="haversine")
    assert d[0, 0] == pytest.approx(EARTH_RADIUS_KM * math.pi / 180.0)


def test_unknown_metric():
    with pytest.raises(InvalidParameterError):
        build_geo_graph(line_nodes([0.0, 1.0, 2.0]), k=1, metric="manhattan")


def test_identical_coordinates_degenerate():
    nodes = NodeTable(coords=np.tile([[10.0, 20.0]], (4, 1)))
    with pytest.raises(DegenerateKernelError):
        build_geo_graph(nodes, k=2)


def test_node_table_validation():
    with pytest.raises(InvalidParameterError):
        NodeTable(coords=np.array([[95.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(InvalidParameterError):
        NodeTable(coords=np.array([[0.0, 0.0], [0.0, 1.0]]), labels=["only-one"])
    table = NodeTable(coords=np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert table.labels == ["0", "1"]
    bigger = table.extended(np.array([[1.0, 1.0]]))
    assert bigger.count == 3
    assert bigger.labels[-1] == "new_0"


def test_edge_list_file(tmp_path, rng):
    graph = build_geo_graph(random_nodes(rng, 25), k=3)
    path = tmp_path / "edges.txt"
    write_edge_list(graph, path)

    header = path.read_text().splitlines()[0].split()
    assert int(header[0]) == 25 and int(header[1]) == 3

    loaded = read_edge_list(path)
    assert loaded.sigma == graph.sigma
    assert_allclose(loaded.adjacency.toarray(), graph.adjacency.toarray(), rtol=0, atol=0)
    assert_allclose(loaded.laplacian.toarray(), graph.laplacian.toarray(), rtol=1e-15, atol=1e-15)


def brute_force_knn(coords, k, metric):
    D = pairwise_distances(coords, coords, metric)
    n = len(coords)
    pairs = {}
    for a in range(n):
        ranked = sorted((D[a, b], b) for b in range(n) if b != a)
        for dist, b in ranked[:k]:
            pairs[(min(a, b), max(a, b))] = dist
    return pairs


@pytest.mark.parametrize("n_nodes", [20, 60, 100])
@pytest.mark.parametrize("k", [1, 3, 5, 10])
@pytest.mark.parametrize("metric", ["euclidean", "haversine"])
def test_knn_matches_all_pairs_search(n_nodes, k, metric):
    nodes = random_nodes(np.random.default_rng(n_nodes * 100 + k), n_nodes)
    expected = brute_force_knn(nodes.coords, k, metric)
    edges = knn_edges(nodes, k=k, metric=metric)
    assert edges.pairs() == set(expected)
    for a, b, dist in edges.edges:
        assert dist == pytest.approx(expected[(a, b)], rel=1e-12)


def test_knn_oracle_with_duplicate_coordinates():
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 2.0]])
    nodes = NodeTable(coords=coords)
    assert knn_edges(nodes, k=2).pairs() == set(brute_force_knn(coords, 2, "euclidean"))
