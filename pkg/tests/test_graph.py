import itertools

import numpy as np
import pytest

from hypomimiacoach.graph import (
    AUNodeFeatures,
    build_knn_graph,
    graph_conv_forward,
    normalize_adjacency,
)


def brute_force_knn_adjacency(H: np.ndarray, k: int) -> np.ndarray:
    """Independent O(n^2) enumeration: full distance table, explicit sort."""
    n = len(H)
    A = np.zeros((n, n))
    for i in range(n):
        ranked = sorted(
            (float(np.sum((H[i] - H[j]) ** 2)), j) for j in range(n) if j != i
        )
        for _, j in ranked[:k]:
            A[i, j] = 1.0
    return np.maximum(A, A.T)


def test_four_node_toy_edges():
    H = np.array([[0.0], [0.1], [1.0], [1.1]])
    graph = build_knn_graph(H, k=2)
    assert graph.edges == frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)})


def test_tie_rule_lower_index():
    H = np.zeros((8, 3))  # all nodes identical
    graph = build_knn_graph(H, k=2)
    assert graph.directed_neighbors[0] == (1, 2)
    for i in range(1, 8):
        expected = tuple(sorted(set(range(8)) - {i}))[:2]
        assert graph.directed_neighbors[i] == expected


def test_k7_complete_graph():
    rng = np.random.default_rng(0)
    graph = build_knn_graph(rng.standard_normal((8, 5)), k=7)
    assert len(graph.edges) == 28
    assert np.array_equal(graph.adjacency, 1.0 - np.eye(8))


def test_k_out_of_range_and_nonfinite():
    H = np.zeros((8, 2))
    with pytest.raises(ValueError):
        build_knn_graph(H, k=0)
    with pytest.raises(ValueError):
        build_knn_graph(H, k=8)
    H[0, 0] = np.nan
    with pytest.raises(ValueError):
        build_knn_graph(H, k=2)


def test_brute_force_oracle_random_instances():
    rng = np.random.default_rng(123)
    for trial in range(100):
        F = int(rng.integers(1, 6))
        H = rng.standard_normal((8, F))
        if trial % 3 == 0:  # force distance ties via duplicated rows
            H[rng.integers(0, 8)] = H[rng.integers(0, 8)]
        k = int(rng.integers(1, 8))
        graph = build_knn_graph(H, k)
        assert np.array_equal(graph.adjacency, brute_force_knn_adjacency(H, k)), (trial, k)


def test_normalize_empty_edges_is_identity():
    a_hat = normalize_adjacency(np.zeros((8, 8))).a_hat
    assert np.allclose(a_hat, np.eye(8), atol=1e-15)


def test_normalize_two_node_single_edge():
    a_hat = normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]])).a_hat
    assert np.allclose(a_hat, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_normalize_complete_graph_uniform():
    a_hat = normalize_adjacency(1.0 - np.eye(8)).a_hat
    assert np.allclose(a_hat, np.full((8, 8), 1.0 / 8.0), atol=1e-15)
    assert np.allclose(a_hat.sum(axis=1), 1.0, atol=1e-12)


def test_normalized_adjacency_invariants_random():
    rng = np.random.default_rng(5)
    for _ in range(100):
        graph = build_knn_graph(rng.standard_normal((8, 4)), int(rng.integers(1, 8)))
        a_hat = normalize_adjacency(graph).a_hat
        assert np.allclose(a_hat, a_hat.T, atol=1e-15)
        assert a_hat.min() >= 0.0 and a_hat.max() <= 1.0
        assert np.all(np.diag(a_hat) > 0.0)
        # spectral bound
        eigenvalues = np.linalg.eigvalsh(a_hat)
        assert np.max(np.abs(eigenvalues)) <= 1.0 + 1e-9


def test_graph_conv_identity_case():
    H = np.abs(np.random.default_rng(1).standard_normal((8, 4)))
    out = graph_conv_forward(np.eye(8), H, np.eye(4))
    assert np.allclose(out, H, atol=1e-15)


def test_graph_conv_two_node_hand_case():
    a_hat = np.array([[0.5, 0.5], [0.5, 0.5]])
    out = graph_conv_forward(a_hat, np.array([[2.0], [0.0]]), np.array([[1.0]]))
    assert np.allclose(out, [[1.0], [1.0]], atol=1e-15)


def test_graph_conv_relu_floor():
    out = graph_conv_forward(np.eye(3), -np.ones((3, 2)), np.eye(2))
    assert np.array_equal(out, np.zeros((3, 2)))


def test_graph_conv_dimension_mismatch():
    with pytest.raises(ValueError):
        graph_conv_forward(np.eye(3), np.zeros((4, 2)), np.eye(2))
    with pytest.raises(ValueError):
        graph_conv_forward(np.eye(3), np.zeros((3, 2)), np.eye(3))


def test_permutation_equivariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        H = rng.standard_normal((8, 4))
        W = rng.standard_normal((4, 6))
        k = int(rng.integers(1, 8))
        perm = rng.permutation(8)
        base = graph_conv_forward(normalize_adjacency(build_knn_graph(H, k)), H, W)
        permuted = graph_conv_forward(
            normalize_adjacency(build_knn_graph(H[perm], k)), H[perm], W
        )
        assert np.allclose(permuted, base[perm], atol=1e-12)


def test_au_node_features_validation():
    with pytest.raises(ValueError):
        AUNodeFeatures(H=np.zeros((7, 4)))
    with pytest.raises(ValueError):
        AUNodeFeatures(H=np.zeros((8, 0)))
    nodes = AUNodeFeatures(H=np.zeros((8, 4)))
    assert len(nodes.node_order) == 8
