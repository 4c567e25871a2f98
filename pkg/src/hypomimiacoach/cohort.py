"""Synthetic cohort generation, subject splits, and cohort file IO.

Stands in for the clinical video front end: each synthetic subject holds a
neutral segment followed by a smile segment, with expressive-AU amplitude
attenuated for the hypomimia class. Per-frame feature vectors are a fixed
deterministic linear embedding of the intensity vector plus Gaussian noise,
so the class signal survives into feature space without any vision model.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import HypomimiaCoachError
from .frames import CANONICAL_AUS, AUFrame, parse_au_frame_stream, serialize_au_frames

EXPRESSIVE_AUS: tuple[str, ...] = ("AU6", "AU12", "AU25", "AU26")
PEAK_AMPLITUDE = 0.8
FRAME_INTERVAL_MS = 33
NEUTRAL_FRACTION = 0.25  # first quarter of each stream is the neutral segment

_FEATURES_MAGIC = b"AUFV1"
_EMBED_SEED = 0x41554656  # constant: the embedding is fixed across all cohorts


class Label(enum.Enum):
    HEALTHY = "healthy"
    HYPOMIMIA = "hypomimia"


@dataclass(frozen=True)
class CohortConfig:
    n_healthy: int
    n_hypomimia: int
    frames_per_subject: int = 40
    attenuation: float = 0.4
    noise_sigma: float = 0.05
    seed: int = 0
    feature_dim: int = 32

    def __post_init__(self):
        if self.n_healthy < 1 or self.n_hypomimia < 1:
            raise ValueError("subject counts must be >= 1")
        if self.frames_per_subject < 4:
            raise ValueError("need at least 4 frames per subject for a neutral segment")
        if not 0.0 < self.attenuation < 1.0:
            raise ValueError("attenuation must lie in (0, 1)")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")


@dataclass(frozen=True)
class SplitRatios:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2

    def __post_init__(self):
        for name, value in (("train", self.train), ("val", self.val), ("test", self.test)):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} ratio must lie in (0, 1)")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1.0")


@dataclass
class LabeledSubject:
    subject_id: str
    label: Label
    frames: list[AUFrame]
    feature_vectors: np.ndarray | None = None  # (n_frames, D) float64

    def __post_init__(self):
        if not self.frames:
            raise ValueError("subject must carry at least one frame")
        if self.feature_vectors is not None and len(self.feature_vectors) != len(self.frames):
            raise ValueError("feature_vectors must align 1:1 with frames")


def neutral_frame_count(n_frames: int) -> int:
    return int(n_frames * NEUTRAL_FRACTION)


def smile_segment(subject: LabeledSubject) -> LabeledSubject:
    """Drop the neutral segment (first 25% of frames) of a subject."""
    cut = neutral_frame_count(len(subject.frames))
    features = subject.feature_vectors[cut:] if subject.feature_vectors is not None else None
    return LabeledSubject(subject.subject_id, subject.label, subject.frames[cut:], features)


@lru_cache(maxsize=8)
def _embedding_matrix(feature_dim: int) -> np.ndarray:
    rng = np.random.default_rng(_EMBED_SEED)
    n = len(CANONICAL_AUS)
    return rng.standard_normal((feature_dim, n)) / math.sqrt(n)


def embed_intensities(intensity_matrix: np.ndarray, feature_dim: int) -> np.ndarray:
    """Fixed deterministic embedding of (n, len(CANONICAL_AUS)) intensities."""
    return intensity_matrix @ _embedding_matrix(feature_dim).T


def frames_to_intensity_matrix(frames: list[AUFrame]) -> np.ndarray:
    out = np.zeros((len(frames), len(CANONICAL_AUS)))
    for i, frame in enumerate(frames):
        for j, au in enumerate(CANONICAL_AUS):
            out[i, j] = frame.intensities.get(au, 0.0)
    return out


def embed_frames(frames: list[AUFrame], feature_dim: int) -> np.ndarray:
    """Noise-free feature vectors for frames that arrived without features."""
    return embed_intensities(frames_to_intensity_matrix(frames), feature_dim)


def _smile_profile(n_frames: int) -> np.ndarray:
    """Per-frame activation factor: 0 in the neutral segment, raised-cosine
    onset over the first tenth of the smile segment (fast, like a real smile
    onset), then held at exactly 1.0."""
    neutral = neutral_frame_count(n_frames)
    smile = n_frames - neutral
    ramp = max(1, smile // 10)
    profile = np.zeros(n_frames)
    for j in range(smile):
        if j < ramp:
            profile[neutral + j] = 0.5 * (1.0 - math.cos(math.pi * (j + 1) / ramp))
        else:
            profile[neutral + j] = 1.0
    return profile


def synthesize_cohort(config: CohortConfig) -> list[LabeledSubject]:
    """Generate a deterministic labeled cohort. Healthy subjects peak
    expressive AUs at 0.8; hypomimia subjects at 0.8 * attenuation."""
    rng = np.random.default_rng(config.seed)
    n_aus = len(CANONICAL_AUS)
    expressive_idx = [CANONICAL_AUS.index(au) for au in EXPRESSIVE_AUS]
    profile = _smile_profile(config.frames_per_subject)

    subjects: list[LabeledSubject] = []
    plan = [(f"h{i:03d}", Label.HEALTHY) for i in range(config.n_healthy)]
    plan += [(f"p{i:03d}", Label.HYPOMIMIA) for i in range(config.n_hypomimia)]
    for subject_id, label in plan:
        peak = PEAK_AMPLITUDE if label is Label.HEALTHY else PEAK_AMPLITUDE * config.attenuation
        intensities = np.zeros((config.frames_per_subject, n_aus))
        intensities[:, expressive_idx] = peak * profile[:, None]
        if config.noise_sigma > 0:
            intensities += rng.normal(0.0, config.noise_sigma, intensities.shape)
            np.clip(intensities, 0.0, 1.0, out=intensities)
        features = embed_intensities(intensities, config.feature_dim)
        if config.noise_sigma > 0:
            features += rng.normal(0.0, config.noise_sigma, features.shape)
        frames = [
            AUFrame(
                t_ms=i * FRAME_INTERVAL_MS,
                intensities={au: float(intensities[i, j]) for j, au in enumerate(CANONICAL_AUS)},
            )
            for i in range(config.frames_per_subject)
        ]
        subjects.append(LabeledSubject(subject_id, label, frames, features))
    return subjects


def split_by_subject(
    cohort: list[LabeledSubject], ratios: SplitRatios, seed: int
) -> tuple[list[LabeledSubject], list[LabeledSubject], list[LabeledSubject]]:
    """Partition whole subjects into train/val/test. Sizes are floor
    allocations with the remainder going to train; deterministic under seed."""
    n = len(cohort)
    if n < 3:
        raise ValueError("need at least 3 subjects to split")
    n_train = int(n * ratios.train)
    n_val = int(n * ratios.val)
    n_test = int(n * ratios.test)
    n_train += n - (n_train + n_val + n_test)
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"ratios give an empty split for {n} subjects")
    order = np.random.default_rng(seed).permutation(n)
    train = [cohort[i] for i in order[:n_train]]
    val = [cohort[i] for i in order[n_train : n_train + n_val]]
    test = [cohort[i] for i in order[n_train + n_val :]]
    return train, val, test


# ------------------------------------------------------------- cohort files
#
# Layout: one directory per subject with label.txt (healthy|hypomimia),
# frames.jsonl, and optional features.bin (magic AUFV1, uint32 count,
# uint32 D, row-major float64 little-endian).


def write_features_bin(path: Path, features: np.ndarray) -> None:
    features = np.ascontiguousarray(features, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_FEATURES_MAGIC)
        fh.write(struct.pack("<II", features.shape[0], features.shape[1]))
        fh.write(features.tobytes())


def read_features_bin(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if raw[: len(_FEATURES_MAGIC)] != _FEATURES_MAGIC:
        raise HypomimiaCoachError(f"{path}: bad features magic")
    count, dim = struct.unpack_from("<II", raw, len(_FEATURES_MAGIC))
    body = raw[len(_FEATURES_MAGIC) + 8 :]
    expected = count * dim * 8
    if len(body) != expected:
        raise HypomimiaCoachError(f"{path}: expected {expected} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(count, dim).astype(np.float64)


def save_cohort(root: Path, cohort: list[LabeledSubject]) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for subject in cohort:
        sdir = root / subject.subject_id
        sdir.mkdir(parents=True, exist_ok=True)
        (sdir / "label.txt").write_text(subject.label.value + "\n")
        (sdir / "frames.jsonl").write_bytes(serialize_au_frames(subject.frames))
        if subject.feature_vectors is not None:
            write_features_bin(sdir / "features.bin", subject.feature_vectors)


def load_cohort(root: Path) -> list[LabeledSubject]:
    root = Path(root)
    subjects = []
    for sdir in sorted(p for p in root.iterdir() if p.is_dir()):
        label_text = (sdir / "label.txt").read_text().strip()
        try:
            label = Label(label_text)
        except ValueError:
            raise HypomimiaCoachError(f"{sdir}: unknown label {label_text!r}") from None
        frames = parse_au_frame_stream((sdir / "frames.jsonl").read_bytes())
        features = None
        if (sdir / "features.bin").exists():
            features = read_features_bin(sdir / "features.bin")
            if len(features) != len(frames):
                raise HypomimiaCoachError(f"{sdir}: features.bin count differs from frames.jsonl")
        subjects.append(LabeledSubject(sdir.name, label, frames, features))
    if not subjects:
        raise HypomimiaCoachError(f"{root}: no subject directories found")
    return subjects


def subject_features(subject: LabeledSubject, feature_dim: int) -> np.ndarray:
    """Stored feature vectors, or the deterministic embedding as fallback."""
    if subject.feature_vectors is not None:
        features = np.asarray(subject.feature_vectors, dtype=np.float64)
        if features.shape[1] != feature_dim:
            raise ValueError(
                f"{subject.subject_id}: stored features have dimension "
                f"{features.shape[1]}, expected {feature_dim}"
            )
        return features
    return embed_frames(subject.frames, feature_dim)


# ------------------------------------------------- AU-labeled pretrain data


@dataclass(frozen=True)
class AULabeledSample:
    """One feature vector with regression targets for the 8 detection AUs."""

    feature_vector: np.ndarray
    au_targets: np.ndarray


def synthesize_au_labeled_samples(
    n: int, feature_dim: int, seed: int, noise_sigma: float = 0.02
) -> list[AULabeledSample]:
    """DISFA stand-in: random intensity vectors with known per-AU targets."""
    from .graph import DETECTION_AUS  # local import to avoid a cycle

    rng = np.random.default_rng(seed)
    target_idx = [CANONICAL_AUS.index(au) for au in DETECTION_AUS]
    intensities = rng.uniform(0.0, 1.0, (n, len(CANONICAL_AUS)))
    features = embed_intensities(intensities, feature_dim)
    if noise_sigma > 0:
        features += rng.normal(0.0, noise_sigma, features.shape)
    return [
        AULabeledSample(features[i].copy(), intensities[i, target_idx].copy())
        for i in range(n)
    ]
