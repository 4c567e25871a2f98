"""Randomized event-sequence driver for the session machine, shared by the
unit tests and the acceptance suite."""

from __future__ import annotations

import random
from collections import Counter

from hypomimiacoach import session as S
from hypomimiacoach.errors import IllegalEvent, NonMonotoneFrame
from hypomimiacoach.exercises import ExerciseCatalog
from hypomimiacoach.frames import CANONICAL_AUS, AUFrame


def _random_frame(rng: random.Random, t_ms: int, full_schema: bool) -> AUFrame:
    codes = CANONICAL_AUS if full_schema else CANONICAL_AUS[:5]
    return AUFrame(t_ms=t_ms, intensities={au: rng.random() for au in codes})


def _random_event(rng: random.Random, state: S.SessionState, catalog: ExerciseCatalog):
    kind = rng.choices(
        ("start_baseline", "baseline_frame", "start_exercise", "instruction_done",
         "frame", "skip", "abort"),
        weights=(5, 25, 6, 12, 40, 3, 1),
    )[0]
    if kind == "start_baseline":
        return S.StartBaseline()
    if kind == "start_exercise":
        pick = rng.choice([e.id for e in catalog.exercises] + [state.plan[0].id] * 3)
        return S.StartExercise(pick)
    if kind == "instruction_done":
        return S.InstructionDone()
    if kind == "skip":
        return S.Skip()
    if kind == "abort":
        return S.Abort()
    # frames: usually monotone and full-schema, sometimes deliberately bad
    regress = rng.random() < 0.08
    t = state.last_t_ms - rng.randint(0, 40) if regress else state.last_t_ms + rng.randint(1, 400)
    frame = _random_frame(rng, max(0, t), full_schema=rng.random() > 0.05)
    if state.phase is S.Phase.BASELINE_CAPTURE:
        return S.BaselineFrame(frame)
    return S.Frame(frame)


def run_random_sequence(catalog: ExerciseCatalog, seed: int, max_events: int = 10) -> Counter:
    """Drive one random session; assert machine invariants after every event.

    Returns counters of accepted/rejected events for reporting.
    """
    rng = random.Random(seed)
    exercises = rng.sample([e.id for e in catalog.exercises], k=rng.randint(1, 3))
    if rng.random() < 0.3:
        timeline = S.build_advanced_timeline(
            catalog, 5000 * rng.randint(1, 4), S.Difficulty.EASY, seed
        )
        state = S.new_advanced_session("fuzz", "p0", timeline, catalog, "t0",
                                       min_baseline_frames=3)
    else:
        state = S.new_basic_session("fuzz", "p0", [catalog.get(e) for e in exercises], "t0",
                                    min_baseline_frames=3)

    reps_allowed = {spec.id: spec.reps for spec in state.plan}
    stats: Counter = Counter()
    for _ in range(rng.randint(1, max_events)):
        event = _random_event(rng, state, catalog)
        before = state
        try:
            state, events = S.advance_session(state, event)
        except (IllegalEvent, NonMonotoneFrame):
            stats["rejected"] += 1
            assert state is before  # rejected events leave state untouched
            continue
        stats["accepted"] += 1

        # --- invariants ---
        assert state.last_t_ms >= before.last_t_ms
        if isinstance(event, (S.Frame, S.BaselineFrame)):
            assert state.last_t_ms == event.frame.t_ms > before.last_t_ms
        rep_counts = Counter(r.exercise_id for r in state.rep_scores)
        for exercise_id, count in rep_counts.items():
            assert count <= reps_allowed[exercise_id], "rep overflow"
        seqs = [e.seq for e in events]
        assert seqs == list(range(before.event_seq + 1, before.event_seq + 1 + len(events)))
        assert state.event_seq == before.event_seq + len(events)
        if before.phase in S.TERMINAL_PHASES:
            raise AssertionError("terminal phase accepted an event")
        for score in state.rep_scores:
            assert 0.0 <= score.score <= 1.0
        if state.timeline is not None:
            assert len(state.segment_scores) <= len(state.timeline.segments)
    stats["final_" + state.phase.value] += 1
    return stats
