import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_frame
from hypomimiacoach.errors import MissingAU
from hypomimiacoach.exercises import ExerciseSpec, FacialRegion
from hypomimiacoach.frames import AUFrame
from hypomimiacoach.scoring import (
    FeedbackLevel,
    capture_baseline,
    feedback_level,
    score_frame,
)

SMILE = ExerciseSpec(
    id="smile", facial_region=FacialRegion.LIP, target_aus={"AU12": 0.6},
)
TWO_AU = ExerciseSpec(
    id="two", facial_region=FacialRegion.LIP, target_aus={"AU12": 0.6, "AU13": 0.4},
)


def baseline_of(**values):
    frames = [make_frame(t * 50, **values) for t in range(10)]
    return capture_baseline(frames)


# ------------------------------------------------------------- baseline


def test_constant_baseline():
    frames = [make_frame(t * 33, AU12=0.1) for t in range(12)]
    assert capture_baseline(frames).values["AU12"] == pytest.approx(0.1)


def test_median_odd_count():
    samples = [0.1, 0.2, 0.9]
    frames = [make_frame(t * 33, AU12=v) for t, v in enumerate(samples)]
    baseline = capture_baseline(frames, min_frames=3)
    assert baseline.values["AU12"] == pytest.approx(0.2)


def test_median_even_count():
    samples = [0.1, 0.2, 0.3, 0.9]
    frames = [make_frame(t * 33, AU12=v) for t, v in enumerate(samples)]
    baseline = capture_baseline(frames, min_frames=4)
    assert baseline.values["AU12"] == pytest.approx(0.25)


def test_baseline_needs_min_frames():
    frames = [make_frame(t * 33) for t in range(9)]
    with pytest.raises(ValueError):
        capture_baseline(frames)  # default minimum is 10


# ------------------------------------------------------------ score_frame


def test_score_reaches_perfect():
    baseline = baseline_of(AU12=0.1)
    fs = score_frame(SMILE, baseline, make_frame(0, AU12=0.7))
    assert fs.per_au["AU12"] == pytest.approx(1.0)
    assert fs.level is FeedbackLevel.PERFECT


def test_frame_identical_to_baseline_is_come_on():
    baseline = baseline_of(AU12=0.1)
    fs = score_frame(SMILE, baseline, make_frame(0, AU12=0.1))
    assert fs.aggregate == 0.0
    assert fs.level is FeedbackLevel.COME_ON


def test_halfway_is_good():
    baseline = baseline_of(AU12=0.1)
    fs = score_frame(SMILE, baseline, make_frame(0, AU12=0.4))
    assert fs.per_au["AU12"] == pytest.approx(0.5)
    assert fs.level is FeedbackLevel.GOOD


def test_ratio_clamps_both_sides():
    baseline = baseline_of(AU12=0.2)
    over = score_frame(SMILE, baseline, make_frame(0, AU12=1.0))  # raw ratio 1.33
    assert over.per_au["AU12"] == 1.0
    under = score_frame(SMILE, baseline, make_frame(0, AU12=0.0))  # raw ratio negative
    assert under.per_au["AU12"] == 0.0


def test_difficulty_scale_shrinks_target():
    baseline = baseline_of(AU12=0.1)
    easy = score_frame(SMILE, baseline, make_frame(0, AU12=0.4), difficulty_scale=0.8)
    hard = score_frame(SMILE, baseline, make_frame(0, AU12=0.4), difficulty_scale=1.0)
    assert easy.per_au["AU12"] == pytest.approx(0.3 / (0.6 * 0.8))
    assert easy.aggregate > hard.aggregate


def test_aggregate_mean_and_missing_au():
    baseline = baseline_of(AU12=0.0, AU13=0.0)
    fs = score_frame(TWO_AU, baseline, make_frame(0, AU12=0.3, AU13=0.4))
    assert fs.aggregate == pytest.approx((0.5 + 1.0) / 2)
    partial = AUFrame(t_ms=0, intensities={"AU12": 0.3})
    with pytest.raises(MissingAU):
        score_frame(TWO_AU, baseline, partial)


def test_score_inversely_scales_with_target_until_clamped():
    baseline = baseline_of(AU12=0.0)
    small_target = ExerciseSpec(id="a", facial_region=FacialRegion.LIP, target_aus={"AU12": 0.3})
    large_target = ExerciseSpec(id="b", facial_region=FacialRegion.LIP, target_aus={"AU12": 0.9})
    frame = make_frame(0, AU12=0.27)
    fs_small = score_frame(small_target, baseline, frame)
    fs_large = score_frame(large_target, baseline, frame)
    assert fs_small.per_au["AU12"] == pytest.approx(0.9)
    assert fs_large.per_au["AU12"] == pytest.approx(0.3)
    assert fs_small.per_au["AU12"] == pytest.approx(fs_large.per_au["AU12"] * 3)


def test_aggregate_invariant_to_au_iteration_order():
    baseline = baseline_of(AU12=0.0, AU13=0.0)
    flipped = ExerciseSpec(id="flip", facial_region=FacialRegion.LIP,
                           target_aus={"AU13": 0.4, "AU12": 0.6})
    frame = make_frame(0, AU12=0.3, AU13=0.1)
    assert score_frame(TWO_AU, baseline, frame).aggregate == pytest.approx(
        score_frame(flipped, baseline, frame).aggregate
    )


# --------------------------------------------------------- feedback_level


def test_level_examples():
    assert feedback_level(1.0) is FeedbackLevel.PERFECT
    assert feedback_level(0.35) is FeedbackLevel.GOOD  # boundary inclusive
    assert feedback_level(0.75) is FeedbackLevel.PERFECT  # boundary inclusive
    assert feedback_level(0.0) is FeedbackLevel.COME_ON
    assert feedback_level(0.3499999) is FeedbackLevel.COME_ON
    assert feedback_level(0.7499999) is FeedbackLevel.GOOD


def test_level_rejects_out_of_range():
    with pytest.raises(ValueError):
        feedback_level(-0.01)
    with pytest.raises(ValueError):
        feedback_level(1.01)


@settings(max_examples=300, deadline=None)
@given(
    a=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    b=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)
def test_level_is_monotone(a, b):
    if a >= b:
        assert feedback_level(a).rank >= feedback_level(b).rank
    else:
        assert feedback_level(a).rank <= feedback_level(b).rank
