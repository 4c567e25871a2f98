"""kNN graph over AU feature nodes and symmetric-normalized graph convolution.

Node proximity is Euclidean distance between per-AU feature vectors, ties
broken by ascending node index, and the edge set is the symmetrized union of
each node's k out-edges. Propagation uses A_hat = D^-1/2 (A + I) D^-1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DETECTION_AUS: tuple[str, ...] = ("AU1", "AU2", "AU4", "AU6", "AU9", "AU12", "AU25", "AU26")
N_NODES = len(DETECTION_AUS)


@dataclass(frozen=True)
class AUNodeFeatures:
    """8 x F node feature matrix in fixed detection-AU order."""

    H: np.ndarray
    node_order: tuple[str, ...] = DETECTION_AUS

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64)
        object.__setattr__(self, "H", H)
        if H.ndim != 2 or H.shape[0] != len(self.node_order):
            raise ValueError(f"H must be {len(self.node_order)} x F, got {H.shape}")
        if H.shape[1] < 1:
            raise ValueError("feature dimension F must be >= 1")


@dataclass(frozen=True)
class AUGraph:
    k: int
    directed_neighbors: tuple[tuple[int, ...], ...]  # per-node k out-edges, pre-symmetrization
    edges: frozenset[tuple[int, int]]  # undirected, i < j
    adjacency: np.ndarray  # (n, n) binary, symmetric, zero diagonal


@dataclass(frozen=True)
class NormalizedAdjacency:
    a_hat: np.ndarray


def _node_matrix(nodes: AUNodeFeatures | np.ndarray) -> np.ndarray:
    if isinstance(nodes, AUNodeFeatures):
        return nodes.H
    H = np.asarray(nodes, dtype=np.float64)
    if H.ndim != 2:
        raise ValueError("node features must be a 2-D matrix")
    return H


def build_knn_graph(nodes: AUNodeFeatures | np.ndarray, k: int) -> AUGraph:
    """Connect each node to its k nearest other nodes (Euclidean), then
    symmetrize. Equal distances resolve to the lower node index."""
    H = _node_matrix(nodes)
    n = H.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    if not np.all(np.isfinite(H)):
        raise ValueError("node features must be finite")

    diff = H[:, None, :] - H[None, :, :]
    dist2 = np.einsum("ijf,ijf->ij", diff, diff)
    np.fill_diagonal(dist2, np.inf)
    # stable sort: equal distances keep ascending index order
    order = np.argsort(dist2, axis=1, kind="stable")
    neighbor_idx = order[:, :k]

    adjacency = np.zeros((n, n))
    for i in range(n):
        adjacency[i, neighbor_idx[i]] = 1.0
    adjacency = np.maximum(adjacency, adjacency.T)

    edges = frozenset(
        (i, j) for i in range(n) for j in range(i + 1, n) if adjacency[i, j] > 0
    )
    return AUGraph(
        k=k,
        directed_neighbors=tuple(tuple(int(j) for j in row) for row in neighbor_idx),
        edges=edges,
        adjacency=adjacency,
    )


def normalize_adjacency(graph: AUGraph | np.ndarray) -> NormalizedAdjacency:
    """A_hat = D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    A = graph.adjacency if isinstance(graph, AUGraph) else np.asarray(graph, dtype=np.float64)
    a_tilde = A + np.eye(A.shape[0])
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    a_hat = a_tilde * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return NormalizedAdjacency(a_hat=a_hat)


def graph_conv_forward(
    a_hat: NormalizedAdjacency | np.ndarray, H: np.ndarray, W: np.ndarray
) -> np.ndarray:
    """One propagation step: ReLU(A_hat @ H @ W)."""
    A = a_hat.a_hat if isinstance(a_hat, NormalizedAdjacency) else np.asarray(a_hat)
    H = np.asarray(H, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if A.shape[1] != H.shape[0] or H.shape[1] != W.shape[0]:
        raise ValueError(
            f"dimension mismatch: A_hat {A.shape}, H {H.shape}, W {W.shape}"
        )
    return np.maximum(A @ H @ W, 0.0)
