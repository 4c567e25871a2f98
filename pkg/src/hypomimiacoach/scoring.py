"""Frame scoring against the neutral baseline and the three-level feedback map.

Movement is measured as the clamped deviation of each target AU above its
baseline, relative to the exercise's target amplitude. The aggregate over
target AUs maps onto Perfect (>= 0.75), Good (>= 0.35), or ComeOn.
"""

from __future__ import annotations

import enum
import statistics
from dataclasses import dataclass

from .errors import MissingAU
from .exercises import ExerciseSpec
from .frames import AUFrame

PERFECT_THRESHOLD = 0.75
GOOD_THRESHOLD = 0.35
DEFAULT_MIN_BASELINE_FRAMES = 10


class FeedbackLevel(enum.Enum):
    COME_ON = "come_on"
    GOOD = "good"
    PERFECT = "perfect"

    @property
    def rank(self) -> int:
        return (FeedbackLevel.COME_ON, FeedbackLevel.GOOD, FeedbackLevel.PERFECT).index(self)


@dataclass(frozen=True)
class NeutralBaseline:
    values: dict[str, float]  # per-AU median intensity over the capture window
    capture_frame_count: int


@dataclass(frozen=True)
class FrameScore:
    per_au: dict[str, float]  # clamped achievement ratio per target AU
    aggregate: float
    level: FeedbackLevel


def capture_baseline(frames: list[AUFrame], min_frames: int = DEFAULT_MIN_BASELINE_FRAMES) -> NeutralBaseline:
    """Per-AU median over the capture window (even count -> mean of middle two)."""
    if len(frames) < min_frames:
        raise ValueError(f"baseline capture needs >= {min_frames} frames, got {len(frames)}")
    codes = frames[0].intensities.keys()
    values = {au: float(statistics.median(f.intensities[au] for f in frames)) for au in codes}
    return NeutralBaseline(values=values, capture_frame_count=len(frames))


def feedback_level(aggregate: float) -> FeedbackLevel:
    """Threshold map, boundary-inclusive: 0.75 -> Perfect, 0.35 -> Good."""
    if not 0.0 <= aggregate <= 1.0:
        raise ValueError(f"aggregate {aggregate!r} outside [0, 1]")
    if aggregate >= PERFECT_THRESHOLD:
        return FeedbackLevel.PERFECT
    if aggregate >= GOOD_THRESHOLD:
        return FeedbackLevel.GOOD
    return FeedbackLevel.COME_ON


def score_frame(
    exercise: ExerciseSpec,
    baseline: NeutralBaseline,
    frame: AUFrame,
    difficulty_scale: float = 1.0,
) -> FrameScore:
    """Per-AU ratio = clamp((current - baseline) / (target * scale), 0, 1);
    aggregate is the mean over the exercise's target AUs."""
    per_au: dict[str, float] = {}
    for au, amplitude in exercise.target_aus.items():
        if au not in frame.intensities:
            raise MissingAU(au, f"frame at t={frame.t_ms}")
        if au not in baseline.values:
            raise MissingAU(au, "neutral baseline")
        ratio = (frame.intensities[au] - baseline.values[au]) / (amplitude * difficulty_scale)
        per_au[au] = min(1.0, max(0.0, ratio))
    aggregate = sum(per_au.values()) / len(per_au)
    return FrameScore(per_au=per_au, aggregate=aggregate, level=feedback_level(aggregate))
