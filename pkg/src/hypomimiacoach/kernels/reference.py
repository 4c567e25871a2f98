"""Pure-numpy kernel backend.

Implements the batched model math (extractor heads -> per-sample kNN graph
-> normalized propagation -> 1-D node convolutions -> classifier) and its
exact analytic gradients. The compiled backend in _fast.pyx mirrors this
contract; tests pin the two to each other.

Parameter tuple order (shared with the compiled backend):
    head_w (8,D,F), head_b (8,F), gcn_w1 (F,F), gcn_w2 (F,F),
    conv1_w (3,F,C1), conv1_b (C1,), conv2_w (3,C1,C2), conv2_b (C2,),
    out_w (C2,2), out_b (2,)
"""

from __future__ import annotations

import numpy as np

NAME = "python"

PROB_CLAMP = 1e-12


def knn_adjacency(H: np.ndarray, k: int) -> np.ndarray:
    """Symmetrized kNN adjacency of one node-feature matrix (ties -> lower index)."""
    return knn_adjacency_batch(H[None, :, :], k)[0]


def knn_adjacency_batch(H: np.ndarray, k: int) -> np.ndarray:
    B, n, _ = H.shape
    diff = H[:, :, None, :] - H[:, None, :, :]
    dist2 = np.einsum("bijf,bijf->bij", diff, diff)
    idx = np.arange(n)
    dist2[:, idx, idx] = np.inf
    order = np.argsort(dist2, axis=2, kind="stable")[:, :, :k]
    A = np.zeros((B, n, n))
    np.put_along_axis(A, order, 1.0, axis=2)
    return np.maximum(A, A.transpose(0, 2, 1))


def _normalize_batch(A: np.ndarray) -> np.ndarray:
    n = A.shape[1]
    a_tilde = A + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=2))
    return a_tilde * inv_sqrt[:, :, None] * inv_sqrt[:, None, :]


def node_features_batch(params: tuple, X: np.ndarray) -> np.ndarray:
    """Extractor-head outputs for a batch: (B, 8, F)."""
    head_w, head_b = params[0], params[1]
    Z0 = np.einsum("bd,idf->bif", X, head_w) + head_b
    return np.maximum(Z0, 0.0)


def _forward_full(params: tuple, X: np.ndarray, k: int, static_a_hat: np.ndarray | None):
    (head_w, head_b, gcn_w1, gcn_w2, conv1_w, conv1_b, conv2_w, conv2_b, out_w, out_b) = params
    if X.ndim != 2 or X.shape[1] != head_w.shape[1]:
        raise ValueError(f"input must be (B, {head_w.shape[1]}), got {X.shape}")
    B = X.shape[0]
    n = head_w.shape[0]

    Z0 = np.einsum("bd,idf->bif", X, head_w) + head_b
    H0 = np.maximum(Z0, 0.0)

    if static_a_hat is not None:
        a_hat = np.broadcast_to(static_a_hat, (B, n, n))
    else:
        a_hat = _normalize_batch(knn_adjacency_batch(H0, k))

    M1 = a_hat @ H0
    Z1 = M1 @ gcn_w1
    H1 = np.maximum(Z1, 0.0)
    M2 = a_hat @ H1
    Z2 = M2 @ gcn_w2
    H2 = np.maximum(Z2, 0.0)

    P2 = np.pad(H2, ((0, 0), (1, 1), (0, 0)))
    Z3 = P2[:, 0:n] @ conv1_w[0] + P2[:, 1 : n + 1] @ conv1_w[1] + P2[:, 2 : n + 2] @ conv1_w[2] + conv1_b
    H3 = np.maximum(Z3, 0.0)
    P3 = np.pad(H3, ((0, 0), (1, 1), (0, 0)))
    Z4 = P3[:, 0:n] @ conv2_w[0] + P3[:, 1 : n + 1] @ conv2_w[1] + P3[:, 2 : n + 2] @ conv2_w[2] + conv2_b
    H4 = np.maximum(Z4, 0.0)

    pool = H4.mean(axis=1)
    logits = pool @ out_w + out_b
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return probs, (Z0, H0, a_hat, M1, Z1, H1, M2, Z2, H2, P2, Z3, H3, P3, Z4, H4, pool)


def forward_batch(
    params: tuple, X: np.ndarray, k: int, static_a_hat: np.ndarray | None = None
) -> np.ndarray:
    """Class probabilities (healthy, hypomimia) for a batch of feature vectors."""
    probs, _ = _forward_full(params, X, k, static_a_hat)
    return probs


def loss_and_grads(
    params: tuple,
    X: np.ndarray,
    labels: np.ndarray,
    k: int,
    static_a_hat: np.ndarray | None = None,
) -> tuple[float, tuple]:
    """Mean cross-entropy over the batch and exact gradients for every tensor.

    The kNN topology is treated as constant (no gradient through edge
    selection); A_hat itself is piecewise constant in the weights so this is
    the true gradient almost everywhere.
    """
    (head_w, head_b, gcn_w1, gcn_w2, conv1_w, conv1_b, conv2_w, conv2_b, out_w, out_b) = params
    probs, cache = _forward_full(params, X, k, static_a_hat)
    (Z0, H0, a_hat, M1, Z1, H1, M2, Z2, H2, P2, Z3, H3, P3, Z4, H4, pool) = cache
    B = X.shape[0]
    n = head_w.shape[0]
    rows = np.arange(B)

    p_true = probs[rows, labels]
    loss = float(np.mean(-np.log(np.maximum(p_true, PROB_CLAMP))))

    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits[p_true <= PROB_CLAMP] = 0.0  # clamped loss is flat there

    d_out_w = np.einsum("be,bt->et", pool, dlogits)
    d_out_b = dlogits.sum(axis=0)
    dpool = dlogits @ out_w.T

    dH4 = np.repeat(dpool[:, None, :], n, axis=1) / n
    dZ4 = dH4 * (Z4 > 0)

    d_conv2_w = np.stack(
        [np.einsum("bnc,bne->ce", P3[:, w : w + n], dZ4) for w in range(3)]
    )
    d_conv2_b = dZ4.sum(axis=(0, 1))
    dP3 = np.zeros_like(P3)
    for w in range(3):
        dP3[:, w : w + n] += dZ4 @ conv2_w[w].T
    dH3 = dP3[:, 1 : n + 1]
    dZ3 = dH3 * (Z3 > 0)

    d_conv1_w = np.stack(
        [np.einsum("bnf,bnc->fc", P2[:, w : w + n], dZ3) for w in range(3)]
    )
    d_conv1_b = dZ3.sum(axis=(0, 1))
    dP2 = np.zeros_like(P2)
    for w in range(3):
        dP2[:, w : w + n] += dZ3 @ conv1_w[w].T
    dH2 = dP2[:, 1 : n + 1]

    dZ2 = dH2 * (Z2 > 0)
    d_gcn_w2 = np.einsum("bnf,bng->fg", M2, dZ2)
    dH1 = a_hat @ (dZ2 @ gcn_w2.T)  # a_hat is symmetric
    dZ1 = dH1 * (Z1 > 0)
    d_gcn_w1 = np.einsum("bnf,bng->fg", M1, dZ1)
    dH0 = a_hat @ (dZ1 @ gcn_w1.T)

    dZ0 = dH0 * (Z0 > 0)
    d_head_w = np.einsum("bd,bif->idf", X, dZ0)
    d_head_b = dZ0.sum(axis=0)

    grads = (
        d_head_w / B,
        d_head_b / B,
        d_gcn_w1 / B,
        d_gcn_w2 / B,
        d_conv1_w / B,
        d_conv1_b / B,
        d_conv2_w / B,
        d_conv2_b / B,
        d_out_w / B,
        d_out_b / B,
    )
    return loss, grads
