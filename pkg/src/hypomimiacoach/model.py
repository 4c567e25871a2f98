"""Hypomimia detection model: weights, forward pass, and the HCMD1 file format.

The forward pipeline is: 8 extractor heads over the input feature vector ->
per-sample kNN graph over the head outputs -> two normalized graph
convolutions -> two 1-D convolutions along the node axis -> mean pool ->
linear -> softmax over (healthy, hypomimia).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .cohort import Label, LabeledSubject, subject_features
from .errors import ModelFormatError, NonFiniteStage
from .graph import (
    DETECTION_AUS,
    N_NODES,
    AUNodeFeatures,
    build_knn_graph,
    graph_conv_forward,
    normalize_adjacency,
)

_MODEL_MAGIC = b"HCMD1"

# (name, shape builder) in serialization order
_TENSOR_SPECS = (
    ("head_w", lambda c: (N_NODES, c.feature_dim, c.au_feature_dim)),
    ("head_b", lambda c: (N_NODES, c.au_feature_dim)),
    ("gcn_w1", lambda c: (c.au_feature_dim, c.au_feature_dim)),
    ("gcn_w2", lambda c: (c.au_feature_dim, c.au_feature_dim)),
    ("conv1_w", lambda c: (3, c.au_feature_dim, c.conv1_channels)),
    ("conv1_b", lambda c: (c.conv1_channels,)),
    ("conv2_w", lambda c: (3, c.conv1_channels, c.conv2_channels)),
    ("conv2_b", lambda c: (c.conv2_channels,)),
    ("out_w", lambda c: (c.conv2_channels, 2)),
    ("out_b", lambda c: (2,)),
)

TENSOR_NAMES = tuple(name for name, _ in _TENSOR_SPECS)


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and training hyperparameters (desk-scale defaults)."""

    feature_dim: int = 32  # D
    au_feature_dim: int = 16  # F
    conv1_channels: int = 16
    conv2_channels: int = 8
    k: int = 2
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    static_graph: bool = False

    def __post_init__(self):
        if min(self.feature_dim, self.au_feature_dim, self.conv1_channels, self.conv2_channels) < 1:
            raise ValueError("all dimensions must be >= 1")
        if not 1 <= self.k <= N_NODES - 1:
            raise ValueError(f"k must lie in [1, {N_NODES - 1}]")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class DetectionModel:
    config: ModelConfig
    tensors: dict[str, np.ndarray]
    static_a_hat: np.ndarray | None = None

    def params(self) -> tuple:
        return tuple(self.tensors[name] for name in TENSOR_NAMES)

    def copy(self) -> "DetectionModel":
        return DetectionModel(
            self.config,
            {name: arr.copy() for name, arr in self.tensors.items()},
            None if self.static_a_hat is None else self.static_a_hat.copy(),
        )

    def validate(self) -> None:
        for name, shape_fn in _TENSOR_SPECS:
            expected = shape_fn(self.config)
            arr = self.tensors.get(name)
            if arr is None or arr.shape != expected:
                got = None if arr is None else arr.shape
                raise ModelFormatError(f"tensor {name}: expected shape {expected}, got {got}")
            if not np.all(np.isfinite(arr)):
                raise ModelFormatError(f"tensor {name} contains non-finite values")
        if self.static_a_hat is not None and self.static_a_hat.shape != (N_NODES, N_NODES):
            raise ModelFormatError("static_a_hat must be 8x8")


def init_model(config: ModelConfig) -> DetectionModel:
    """Seeded He-style initialization; biases start at zero."""
    rng = np.random.default_rng(config.seed)
    t: dict[str, np.ndarray] = {}
    D, F = config.feature_dim, config.au_feature_dim
    C1, C2 = config.conv1_channels, config.conv2_channels
    t["head_w"] = rng.standard_normal((N_NODES, D, F)) * np.sqrt(2.0 / D)
    t["head_b"] = np.zeros((N_NODES, F))
    t["gcn_w1"] = rng.standard_normal((F, F)) * np.sqrt(2.0 / F)
    t["gcn_w2"] = rng.standard_normal((F, F)) * np.sqrt(2.0 / F)
    t["conv1_w"] = rng.standard_normal((3, F, C1)) * np.sqrt(2.0 / (3 * F))
    t["conv1_b"] = np.zeros(C1)
    t["conv2_w"] = rng.standard_normal((3, C1, C2)) * np.sqrt(2.0 / (3 * C1))
    t["conv2_b"] = np.zeros(C2)
    t["out_w"] = rng.standard_normal((C2, 2)) * np.sqrt(2.0 / C2)
    t["out_b"] = np.zeros(2)
    return DetectionModel(config, t)


# ------------------------------------------------------------ forward pass


def extract_au_node_features(model: DetectionModel, feature_vector: np.ndarray) -> AUNodeFeatures:
    """Per-AU head outputs: row i = ReLU(x @ W_i + b_i)."""
    x = np.asarray(feature_vector, dtype=np.float64)
    if x.shape != (model.config.feature_dim,):
        raise ValueError(f"feature vector must have length {model.config.feature_dim}, got {x.shape}")
    H = np.maximum(np.einsum("d,idf->if", x, model.tensors["head_w"]) + model.tensors["head_b"], 0.0)
    return AUNodeFeatures(H=H, node_order=DETECTION_AUS)


def _check_finite(stage: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStage(stage)
    return arr


def forward(model: DetectionModel, feature_vector: np.ndarray) -> np.ndarray:
    """Single-sample forward pass through the public graph ops, with
    per-stage finiteness checks. The batched kernel path is numerically
    identical (pinned by tests)."""
    cfg = model.config
    nodes = extract_au_node_features(model, feature_vector)
    _check_finite("extractor_heads", nodes.H)
    if model.static_a_hat is not None:
        a_hat = model.static_a_hat
    else:
        a_hat = normalize_adjacency(build_knn_graph(nodes, cfg.k)).a_hat
    h = graph_conv_forward(a_hat, nodes.H, model.tensors["gcn_w1"])
    _check_finite("graph_conv_1", h)
    h = graph_conv_forward(a_hat, h, model.tensors["gcn_w2"])
    _check_finite("graph_conv_2", h)

    padded = np.pad(h, ((1, 1), (0, 0)))
    w1 = model.tensors["conv1_w"]
    h = np.maximum(
        padded[0:N_NODES] @ w1[0] + padded[1 : N_NODES + 1] @ w1[1] + padded[2 : N_NODES + 2] @ w1[2]
        + model.tensors["conv1_b"],
        0.0,
    )
    _check_finite("conv1", h)
    padded = np.pad(h, ((1, 1), (0, 0)))
    w2 = model.tensors["conv2_w"]
    h = np.maximum(
        padded[0:N_NODES] @ w2[0] + padded[1 : N_NODES + 1] @ w2[1] + padded[2 : N_NODES + 2] @ w2[2]
        + model.tensors["conv2_b"],
        0.0,
    )
    _check_finite("conv2", h)

    pooled = h.mean(axis=0)
    logits = pooled @ model.tensors["out_w"] + model.tensors["out_b"]
    _check_finite("linear_out", logits)
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def forward_batch(model: DetectionModel, X: np.ndarray) -> np.ndarray:
    """Batched probabilities via the active kernel backend."""
    return kernels.forward_batch(model.params(), np.asarray(X, dtype=np.float64),
                                 model.config.k, model.static_a_hat)


def cross_entropy_loss(probabilities: np.ndarray, label: int) -> float:
    """-ln p[label], input clamped at 1e-12."""
    if label not in (0, 1):
        raise ValueError("label must be 0 (healthy) or 1 (hypomimia)")
    return float(-np.log(max(float(probabilities[label]), kernels.PROB_CLAMP)))


# --------------------------------------------------------- subject decision


def classify_subject(
    model: DetectionModel, frames_or_features: LabeledSubject | np.ndarray
) -> tuple[Label, float]:
    """Mean hypomimia probability over frames; > 0.5 is Hypomimia, ties Healthy."""
    if isinstance(frames_or_features, LabeledSubject):
        X = subject_features(frames_or_features, model.config.feature_dim)
    else:
        X = np.asarray(frames_or_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need at least one frame feature vector")
    prob = float(forward_batch(model, X)[:, 1].mean())
    label = Label.HYPOMIMIA if prob > 0.5 else Label.HEALTHY
    return label, prob


# -------------------------------------------------------------- model file
#
# HCMD1 layout: magic, uint32 D,F,C1,C2,k, then per tensor: uint32 name
# length, name bytes, uint32 rank, uint32 dims, float64 LE row-major data.
# static_a_hat is appended last when the model carries one.


def save_model(model: DetectionModel, path: Path) -> None:
    model.validate()
    cfg = model.config
    out = bytearray()
    out += _MODEL_MAGIC
    out += struct.pack(
        "<5I", cfg.feature_dim, cfg.au_feature_dim, cfg.conv1_channels, cfg.conv2_channels, cfg.k
    )
    items: list[tuple[str, np.ndarray]] = [(n, model.tensors[n]) for n in TENSOR_NAMES]
    if model.static_a_hat is not None:
        items.append(("static_a_hat", model.static_a_hat))
    for name, arr in items:
        encoded = name.encode("ascii")
        out += struct.pack("<I", len(encoded))
        out += encoded
        out += struct.pack("<I", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_model(path: Path) -> DetectionModel:
    raw = Path(path).read_bytes()
    if raw[: len(_MODEL_MAGIC)] != _MODEL_MAGIC:
        raise ModelFormatError(f"{path}: unknown magic {raw[:5]!r}")
    offset = len(_MODEL_MAGIC)
    try:
        D, F, C1, C2, k = struct.unpack_from("<5I", raw, offset)
    except struct.error as exc:
        raise ModelFormatError(f"{path}: truncated header") from exc
    offset += 20
    config = ModelConfig(feature_dim=D, au_feature_dim=F, conv1_channels=C1, conv2_channels=C2, k=k)

    tensors: dict[str, np.ndarray] = {}
    static_a_hat = None
    while offset < len(raw):
        try:
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset : offset + name_len].decode("ascii")
            offset += name_len
            (rank,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            offset += count * 8
        except (struct.error, UnicodeDecodeError, ValueError) as exc:
            raise ModelFormatError(f"{path}: corrupt tensor record") from exc
        arr = data.astype(np.float64).reshape(dims)
        if name == "static_a_hat":
            static_a_hat = arr
        elif name in TENSOR_NAMES:
            tensors[name] = arr
        else:
            raise ModelFormatError(f"{path}: unknown tensor {name!r}")
    missing = [n for n in TENSOR_NAMES if n not in tensors]
    if missing:
        raise ModelFormatError(f"{path}: missing tensors {missing}")
    model = DetectionModel(config, tensors, static_a_hat)
    model.validate()
    return model
