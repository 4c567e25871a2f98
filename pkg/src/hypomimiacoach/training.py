"""SGD training for the detection model, plus the AU-head pretraining path.

Training is single-threaded and fully deterministic under the config seed:
the same seed yields bit-identical weights and history on a given backend.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cohort import AULabeledSample, Label, LabeledSubject, subject_features
from .errors import TrainingDiverged
from .graph import N_NODES, build_knn_graph, normalize_adjacency
from .model import TENSOR_NAMES, DetectionModel, ModelConfig, init_model


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def history_to_csv(history: list[EpochStats]) -> str:
    buf = io.StringIO()
    buf.write("epoch,train_loss,val_loss,val_accuracy\n")
    for h in history:
        buf.write(f"{h.epoch},{h.train_loss:.6f},{h.val_loss:.6f},{h.val_accuracy:.6f}\n")
    return buf.getvalue()


def sgd_step(
    params: tuple, grads: tuple, lr: float, momentum: float, velocity: tuple | None
) -> tuple[tuple, tuple]:
    """Momentum SGD: v <- momentum*v + g; w <- w - lr*v. Pure (new arrays)."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must lie in [0, 1)")
    if velocity is None:
        velocity = tuple(np.zeros_like(p) for p in params)
    new_v = []
    new_p = []
    for w, g, v in zip(params, grads, velocity):
        if w.shape != g.shape or w.shape != v.shape:
            raise ValueError(f"shape mismatch: w {w.shape}, g {g.shape}, v {v.shape}")
        vn = momentum * v + g
        new_v.append(vn)
        new_p.append(w - lr * vn)
    return tuple(new_p), tuple(new_v)


def model_gradients(
    model: DetectionModel, X: np.ndarray, labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and exact analytic gradients keyed by tensor name."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    loss, grads = kernels.loss_and_grads(
        model.params(), X, labels, model.config.k, model.static_a_hat
    )
    return loss, dict(zip(TENSOR_NAMES, grads))


def _dataset(subjects: list[LabeledSubject], feature_dim: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for s in subjects:
        feats = subject_features(s, feature_dim)
        xs.append(feats)
        ys.append(np.full(len(feats), 1 if s.label is Label.HYPOMIMIA else 0, dtype=np.int64))
    return np.concatenate(xs, axis=0), np.concatenate(ys)


def _frame_accuracy(model_params: tuple, k: int, static_a_hat, X, y) -> float:
    probs = kernels.forward_batch(model_params, X, k, static_a_hat)
    pred = (probs[:, 1] > 0.5).astype(np.int64)
    return float(np.mean(pred == y))


def _mean_loss(model_params: tuple, k: int, static_a_hat, X, y) -> float:
    probs = kernels.forward_batch(model_params, X, k, static_a_hat)
    p_true = np.maximum(probs[np.arange(len(y)), y], kernels.PROB_CLAMP)
    return float(np.mean(-np.log(p_true)))


def static_graph_a_hat(model: DetectionModel, X: np.ndarray) -> np.ndarray:
    """Frozen adjacency from mean extractor features over a dataset."""
    H = kernels.node_features_batch(model.params(), X).mean(axis=0)
    return normalize_adjacency(build_knn_graph(H, model.config.k)).a_hat


def train(
    train_subjects: list[LabeledSubject],
    val_subjects: list[LabeledSubject],
    config: ModelConfig,
    pretrained_heads: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[DetectionModel, list[EpochStats]]:
    """Mini-batch momentum SGD over shuffled frames; returns the weights of
    the best-validation-accuracy epoch (earliest wins ties) and the full
    per-epoch history."""
    if not train_subjects or not val_subjects:
        raise ValueError("train and val subject sets must be nonempty")
    X_train, y_train = _dataset(train_subjects, config.feature_dim)
    X_val, y_val = _dataset(val_subjects, config.feature_dim)

    model = init_model(config)
    if pretrained_heads is not None:
        head_w, head_b = pretrained_heads
        if head_w.shape != model.tensors["head_w"].shape or head_b.shape != model.tensors["head_b"].shape:
            raise ValueError("pretrained head shapes do not match the model config")
        model.tensors["head_w"] = head_w.copy()
        model.tensors["head_b"] = head_b.copy()
    if config.static_graph:
        model.static_a_hat = static_graph_a_hat(model, X_train)

    rng = np.random.default_rng(config.seed)
    params = model.params()
    velocity: tuple | None = None
    n = len(X_train)
    history: list[EpochStats] = []
    best_acc = -1.0
    best_params = params

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = kernels.loss_and_grads(
                params, X_train[idx], y_train[idx], config.k, model.static_a_hat
            )
            loss_sum += loss * len(idx)
            params, velocity = sgd_step(params, grads, config.lr, config.momentum, velocity)
        train_loss = loss_sum / n
        if not np.isfinite(train_loss):
            raise TrainingDiverged(epoch)
        val_loss = _mean_loss(params, config.k, model.static_a_hat, X_val, y_val)
        val_acc = _frame_accuracy(params, config.k, model.static_a_hat, X_val, y_val)
        history.append(EpochStats(epoch, train_loss, val_loss, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = tuple(p.copy() for p in params)

    model.tensors = dict(zip(TENSOR_NAMES, best_params))
    return model, history


# ------------------------------------------------------------- pretraining


@dataclass
class PretrainResult:
    head_w: np.ndarray
    head_b: np.ndarray
    readout_w: np.ndarray
    readout_b: float

    @property
    def heads(self) -> tuple[np.ndarray, np.ndarray]:
        return self.head_w, self.head_b

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Per-AU intensity predictions (B, 8) through heads + shared readout."""
        H0 = np.maximum(np.einsum("bd,idf->bif", X, self.head_w) + self.head_b, 0.0)
        return H0 @ self.readout_w + self.readout_b


def pretrain_au_heads(
    samples: list[AULabeledSample],
    config: ModelConfig,
    epochs: int = 300,
    lr: float = 0.1,
    momentum: float = 0.9,
    batch_size: int = 64,
) -> PretrainResult:
    """Train the 8 extractor heads plus one shared linear readout to regress
    per-AU intensities (squared error); the heads transfer into
    DetectionModel initialization."""
    if not samples:
        raise ValueError("sample set must be nonempty")
    D, F = config.feature_dim, config.au_feature_dim
    X = np.stack([s.feature_vector for s in samples])
    T = np.stack([s.au_targets for s in samples])
    if X.shape[1] != D or T.shape[1] != N_NODES:
        raise ValueError("sample dimensions do not match the model config")

    rng = np.random.default_rng(config.seed)
    head_w = rng.standard_normal((N_NODES, D, F)) * np.sqrt(2.0 / D)
    head_b = np.zeros((N_NODES, F))
    readout_w = rng.standard_normal(F) * np.sqrt(1.0 / F)
    readout_b = 0.0

    params = [head_w, head_b, readout_w, np.array([readout_b])]
    velocity = [np.zeros_like(p) for p in params]
    n = len(X)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, tb = X[idx], T[idx]
            B = len(xb)
            Z0 = np.einsum("bd,idf->bif", xb, params[0]) + params[1]
            H0 = np.maximum(Z0, 0.0)
            pred = H0 @ params[2] + params[3][0]  # (B, 8)
            err = pred - tb
            dpred = 2.0 * err / (B * N_NODES)
            g_readout_w = np.einsum("bif,bi->f", H0, dpred)
            g_readout_b = np.array([dpred.sum()])
            dH0 = dpred[:, :, None] * params[2][None, None, :]
            dZ0 = dH0 * (Z0 > 0)
            g_head_w = np.einsum("bd,bif->idf", xb, dZ0)
            g_head_b = dZ0.sum(axis=0)
            grads = [g_head_w, g_head_b, g_readout_w, g_readout_b]
            for i in range(4):
                velocity[i] = momentum * velocity[i] + grads[i]
                params[i] = params[i] - lr * velocity[i]
    return PretrainResult(params[0], params[1], params[2], float(params[3][0]))
