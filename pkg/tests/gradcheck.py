"""Finite-difference gradient oracle shared by the unit and acceptance tests.

The numeric side evaluates the loss through forward_batch (probabilities ->
clamped cross-entropy), independent of the backward pass under test.
"""

from __future__ import annotations

import numpy as np

from hypomimiacoach import kernels
from hypomimiacoach.model import TENSOR_NAMES, DetectionModel, ModelConfig, init_model


def batch_loss(params: tuple, X, y, k: int, static_a_hat=None) -> float:
    probs = kernels.forward_batch(params, X, k, static_a_hat)
    p_true = np.maximum(probs[np.arange(len(y)), y], kernels.PROB_CLAMP)
    return float(np.mean(-np.log(p_true)))


def finite_difference_check(model: DetectionModel, X, y, step=1e-5, rtol=1e-4) -> float:
    """Assert every tensor's analytic gradient matches central differences;
    returns the worst relative error seen."""
    params = model.params()
    k = model.config.k
    _, grads = kernels.loss_and_grads(params, X, y, k, model.static_a_hat)
    worst = 0.0
    for t_idx, name in enumerate(TENSOR_NAMES):
        analytic = grads[t_idx]
        it = np.nditer(params[t_idx], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            perturbed = [p.copy() for p in params]
            perturbed[t_idx][idx] += step
            up = batch_loss(tuple(perturbed), X, y, k, model.static_a_hat)
            perturbed[t_idx][idx] -= 2 * step
            down = batch_loss(tuple(perturbed), X, y, k, model.static_a_hat)
            numeric = (up - down) / (2 * step)
            denom = max(abs(numeric), abs(analytic[idx]), 1e-8)
            rel = abs(numeric - analytic[idx]) / denom
            worst = max(worst, rel)
            assert rel < rtol, f"{name}{idx}: numeric {numeric} vs analytic {analytic[idx]}"
    return worst


def safe_gradcheck_case(seed: int, n_samples: int = 3):
    """A random small model and batch located away from ReLU kinks and kNN
    distance ties, so the loss is differentiable at the test point."""
    rng = np.random.default_rng(seed)
    while True:
        config = ModelConfig(feature_dim=8, au_feature_dim=4, conv1_channels=4,
                             conv2_channels=4, seed=int(rng.integers(0, 2**31)))
        model = init_model(config)
        for name in TENSOR_NAMES:
            if name.endswith("_b"):
                model.tensors[name] = rng.standard_normal(model.tensors[name].shape) * 0.3
        X = rng.standard_normal((n_samples, 8))
        y = rng.integers(0, 2, n_samples)
        if _case_is_safe(model, X):
            return model, X, y


def _case_is_safe(model, X, margin=1e-3) -> bool:
    """Reject cases where a +-step perturbation could flip a ReLU branch
    (any preactivation near 0) or the kNN topology (near-tied distances)."""
    from hypomimiacoach.kernels import reference

    params = model.params()
    probs, cache = reference._forward_full(params, X, model.config.k, model.static_a_hat)
    if np.min(probs) < 1e-9:
        return False
    preactivations = (cache[0], cache[4], cache[7], cache[10], cache[13])  # Z0, Z1, Z2, Z3, Z4
    for Z in preactivations:
        if np.min(np.abs(Z)) < margin:
            return False
    H0 = cache[1]
    for b in range(len(X)):
        H = H0[b]
        d = ((H[:, None, :] - H[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d, np.inf)
        for i in range(8):
            row = np.sort(d[i])
            if np.min(np.abs(np.diff(row[:7]))) < margin:
                return False
    return True
