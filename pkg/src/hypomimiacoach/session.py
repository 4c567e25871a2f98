"""Training session state machines, the advanced timeline, and session reports.

advance_session is a pure transition function: (state, event) -> (new state,
emitted feedback events). Illegal events raise and leave the caller's state
untouched, so replaying an accepted event log is deterministic down to the
byte-identical report.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from .errors import HypomimiaCoachError, IllegalEvent, NonMonotoneFrame
from .exercises import REGION_CYCLE, ExerciseCatalog, ExerciseSpec, FacialRegion
from .frames import AUFrame, frame_to_record, record_to_frame
from .scoring import (
    DEFAULT_MIN_BASELINE_FRAMES,
    FeedbackLevel,
    NeutralBaseline,
    capture_baseline,
    score_frame,
)

SEGMENT_MS = 5000
BEAT_INTERVAL_MS = 1000

# Placeholder audio assets; the two opera styles follow the lip/articulation
# pairing, other regions get a plain metronome track.
REGION_TRACKS = {
    FacialRegion.EYEBROW: "metronome_basic",
    FacialRegion.NOSE_AND_EYE: "metronome_basic",
    FacialRegion.LIP: "opera_lively_rolling_lantern",
    FacialRegion.ARTICULATION: "opera_melodious_chen_shimei",
}


class Mode(enum.Enum):
    BASIC = "basic"
    ADVANCED = "advanced"


class Phase(enum.Enum):
    IDLE = "idle"
    BASELINE_CAPTURE = "baseline_capture"
    INSTRUCTION = "instruction"
    EXERCISING = "exercising"
    REP_FEEDBACK = "rep_feedback"
    SEGMENT_ACTIVE = "segment_active"
    COMPLETE = "complete"
    ABORTED = "aborted"


TERMINAL_PHASES = (Phase.COMPLETE, Phase.ABORTED)


class Difficulty(enum.Enum):
    EASY = "easy"
    HARD = "hard"

    @property
    def scale(self) -> float:
        return 0.8 if self is Difficulty.EASY else 1.0


# ------------------------------------------------------------------ events


@dataclass(frozen=True)
class StartBaseline:
    pass


@dataclass(frozen=True)
class BaselineFrame:
    frame: AUFrame


@dataclass(frozen=True)
class StartExercise:
    exercise_id: str


@dataclass(frozen=True)
class InstructionDone:
    pass


@dataclass(frozen=True)
class Frame:
    frame: AUFrame


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Abort:
    pass


SessionEvent = Union[StartBaseline, BaselineFrame, StartExercise, InstructionDone, Frame, Skip, Abort]

_EVENT_NAMES = {
    StartBaseline: "start_baseline",
    BaselineFrame: "baseline_frame",
    StartExercise: "start_exercise",
    InstructionDone: "instruction_done",
    Frame: "frame",
    Skip: "skip",
    Abort: "abort",
}


def event_name(event: SessionEvent) -> str:
    return _EVENT_NAMES[type(event)]


@dataclass(frozen=True)
class FeedbackEvent:
    """One feedback item pushed to the client; seq is session-monotone."""

    seq: int
    kind: str
    t_ms: int | None
    data: dict

    def to_record(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "t_ms": self.t_ms, "data": self.data}


# ---------------------------------------------------------------- timeline


@dataclass(frozen=True)
class TimelineSegment:
    index: int
    start_ms: int
    end_ms: int
    exercise_id: str
    opera_track_id: str
    beat_ms: tuple[int, ...]

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "exercise_id": self.exercise_id,
            "opera_track_id": self.opera_track_id,
            "beat_ms": list(self.beat_ms),
        }


@dataclass(frozen=True)
class AdvancedTimeline:
    segments: tuple[TimelineSegment, ...]
    duration_ms: int
    difficulty: Difficulty
    seed: int

    def segment_at(self, rel_ms: int) -> TimelineSegment:
        return self.segments[rel_ms // SEGMENT_MS]

    def to_record(self) -> dict:
        return {
            "duration_ms": self.duration_ms,
            "difficulty": self.difficulty.value,
            "seed": self.seed,
            "segments": [s.to_record() for s in self.segments],
        }


def build_advanced_timeline(
    catalog: ExerciseCatalog, duration_ms: int, difficulty: Difficulty, seed: int
) -> AdvancedTimeline:
    """Contiguous 5 s segments cycling eyebrow -> nose/eye -> lip ->
    articulation, exercises drawn round-robin from a seeded shuffle within
    each region; beat markers every 1000 ms."""
    if duration_ms < SEGMENT_MS:
        raise ValueError(f"duration must be at least one segment ({SEGMENT_MS} ms)")
    if duration_ms % SEGMENT_MS != 0:
        raise ValueError(f"duration must be a multiple of {SEGMENT_MS} ms")
    rng = random.Random(seed)
    region_ids: dict[FacialRegion, list[str]] = {}
    for region in REGION_CYCLE:
        ids = [e.id for e in catalog.by_region(region)]
        if not ids:
            raise HypomimiaCoachError(f"catalog has no exercises for region {region.value}")
        rng.shuffle(ids)
        region_ids[region] = ids
    counters = {region: 0 for region in REGION_CYCLE}

    segments = []
    for i in range(duration_ms // SEGMENT_MS):
        region = REGION_CYCLE[i % len(REGION_CYCLE)]
        ids = region_ids[region]
        exercise_id = ids[counters[region] % len(ids)]
        counters[region] += 1
        start = i * SEGMENT_MS
        segments.append(
            TimelineSegment(
                index=i,
                start_ms=start,
                end_ms=start + SEGMENT_MS,
                exercise_id=exercise_id,
                opera_track_id=REGION_TRACKS[region],
                beat_ms=tuple(start + j * BEAT_INTERVAL_MS for j in range(SEGMENT_MS // BEAT_INTERVAL_MS)),
            )
        )
    return AdvancedTimeline(tuple(segments), duration_ms, difficulty, seed)


# ------------------------------------------------------------------- state


@dataclass(frozen=True)
class RepScore:
    exercise_id: str
    region: str
    rep_index: int
    score: float
    timed_out: bool


@dataclass(frozen=True)
class SegmentScore:
    segment_index: int
    exercise_id: str
    region: str
    score: float
    frame_count: int


@dataclass(frozen=True)
class SessionState:
    session_id: str
    patient_id: str
    mode: Mode
    started_at: str
    plan: tuple[ExerciseSpec, ...]
    timeline: AdvancedTimeline | None = None
    difficulty_scale: float = 1.0
    min_baseline_frames: int = DEFAULT_MIN_BASELINE_FRAMES

    phase: Phase = Phase.IDLE
    baseline_frames: tuple[AUFrame, ...] = ()
    baseline: NeutralBaseline | None = None
    au_set: frozenset[str] | None = None
    last_t_ms: int = -1

    exercise_idx: int = 0
    rep_index: int = 1
    rep_start_t: int | None = None
    rep_sustain_ms: int = 0
    rep_best: float = 0.0
    prev_level_ok: bool = False
    current_level: FeedbackLevel | None = None
    rep_scores: tuple[RepScore, ...] = ()

    seg_index: int = 0
    seg_sum: float = 0.0
    seg_count: int = 0
    segment_scores: tuple[SegmentScore, ...] = ()
    timeline_epoch_ms: int | None = None

    event_seq: int = 0
    level_counts: tuple[int, int, int] = (0, 0, 0)  # come_on, good, perfect
    frames_scored: int = 0
    transition_log: tuple[tuple[int | None, str, str], ...] = ()

    def current_exercise(self) -> ExerciseSpec:
        return self.plan[self.exercise_idx]

    def spec_for(self, exercise_id: str) -> ExerciseSpec:
        for spec in self.plan:
            if spec.id == exercise_id:
                return spec
        raise HypomimiaCoachError(f"exercise {exercise_id} not in session plan")


def new_basic_session(
    session_id: str,
    patient_id: str,
    exercises: list[ExerciseSpec],
    started_at: str,
    min_baseline_frames: int = DEFAULT_MIN_BASELINE_FRAMES,
) -> SessionState:
    if not exercises:
        raise ValueError("basic session needs at least one exercise")
    return SessionState(
        session_id=session_id,
        patient_id=patient_id,
        mode=Mode.BASIC,
        started_at=started_at,
        plan=tuple(exercises),
        min_baseline_frames=min_baseline_frames,
    )


def new_advanced_session(
    session_id: str,
    patient_id: str,
    timeline: AdvancedTimeline,
    catalog: ExerciseCatalog,
    started_at: str,
    min_baseline_frames: int = DEFAULT_MIN_BASELINE_FRAMES,
) -> SessionState:
    plan_ids: list[str] = []
    for seg in timeline.segments:
        if seg.exercise_id not in plan_ids:
            plan_ids.append(seg.exercise_id)
    return SessionState(
        session_id=session_id,
        patient_id=patient_id,
        mode=Mode.ADVANCED,
        started_at=started_at,
        plan=tuple(catalog.get(eid) for eid in plan_ids),
        timeline=timeline,
        difficulty_scale=timeline.difficulty.scale,
        min_baseline_frames=min_baseline_frames,
    )


# -------------------------------------------------------------- transitions


class _Emitter:
    """Accumulates feedback events with session-monotone sequence numbers."""

    def __init__(self, state: SessionState):
        self.base_seq = state.event_seq
        self.events: list[FeedbackEvent] = []

    def emit(self, kind: str, t_ms: int | None = None, **data) -> None:
        self.events.append(FeedbackEvent(self.base_seq + len(self.events) + 1, kind, t_ms, data))


def _move(state: SessionState, to: Phase, t_ms: int | None = None, **changes) -> SessionState:
    log = state.transition_log + ((t_ms, state.phase.value, to.value),)
    return replace(state, phase=to, transition_log=log, **changes)


def _validate_session_frame(state: SessionState, frame: AUFrame) -> None:
    if frame.t_ms <= state.last_t_ms:
        raise NonMonotoneFrame(frame.t_ms, state.last_t_ms)
    if state.au_set is not None and frame.au_set() != state.au_set:
        raise IllegalEvent(state.phase.value, "frame", "AU set differs from the session stream")


def _plan_target_aus(state: SessionState) -> set[str]:
    targets: set[str] = set()
    for spec in state.plan:
        targets.update(spec.target_aus)
    return targets


def _enter_exercise(state: SessionState, em: _Emitter, idx: int, t_ms: int | None) -> SessionState:
    spec = state.plan[idx]
    em.emit(
        "exercise_started",
        t_ms,
        exercise_id=spec.id,
        exercise_index=idx,
        instruction_text=spec.instruction_text,
        instruction_media=spec.instruction_media,
    )
    return _move(state, Phase.INSTRUCTION, t_ms, exercise_idx=idx, rep_index=1)


def _finish_exercise(state: SessionState, em: _Emitter, t_ms: int | None) -> SessionState:
    """Advance past the current exercise: next instruction or Complete."""
    em.emit("exercise_completed", t_ms, exercise_id=state.current_exercise().id)
    nxt = state.exercise_idx + 1
    if nxt < len(state.plan):
        return _enter_exercise(state, em, nxt, t_ms)
    em.emit("session_completed", t_ms)
    return _move(state, Phase.COMPLETE, t_ms)


def _start_rep(state: SessionState, em: _Emitter, t_ms: int | None) -> SessionState:
    em.emit("rep_started", t_ms, exercise_id=state.current_exercise().id, rep_index=state.rep_index)
    return _move(
        state,
        Phase.EXERCISING,
        t_ms,
        rep_start_t=None,
        rep_sustain_ms=0,
        rep_best=0.0,
        prev_level_ok=False,
        current_level=None,
    )


def _complete_rep(
    state: SessionState, em: _Emitter, t_ms: int, score: float, timed_out: bool
) -> SessionState:
    spec = state.current_exercise()
    rep = RepScore(spec.id, spec.facial_region.value, state.rep_index, score, timed_out)
    state = replace(state, rep_scores=state.rep_scores + (rep,))
    em.emit(
        "rep_completed",
        t_ms,
        exercise_id=spec.id,
        rep_index=state.rep_index,
        score=score,
        timed_out=timed_out,
    )
    if state.rep_index < spec.reps:
        return _move(state, Phase.REP_FEEDBACK, t_ms, rep_index=state.rep_index + 1)
    return _finish_exercise(state, em, t_ms)


def _tally_level(state: SessionState, level: FeedbackLevel) -> SessionState:
    counts = list(state.level_counts)
    counts[level.rank] += 1
    return replace(state, level_counts=tuple(counts))


def _score_and_signal(
    state: SessionState, em: _Emitter, spec: ExerciseSpec, frame: AUFrame
) -> tuple[SessionState, float, FeedbackLevel]:
    fs = score_frame(spec, state.baseline, frame, state.difficulty_scale)
    state = replace(state, frames_scored=state.frames_scored + 1)
    if fs.level is not state.current_level:
        state = _tally_level(replace(state, current_level=fs.level), fs.level)
        em.emit("level_changed", frame.t_ms, level=fs.level.value, aggregate=fs.aggregate)
    return state, fs.aggregate, fs.level


def _exercising_frame(state: SessionState, em: _Emitter, frame: AUFrame) -> SessionState:
    _validate_session_frame(state, frame)
    spec = state.current_exercise()
    t = frame.t_ms
    rep_start = state.rep_start_t if state.rep_start_t is not None else t

    # timeout is checked before the frame is scored and wins over sustain
    if t - rep_start >= spec.timeout_ms:
        state = replace(state, last_t_ms=t, rep_start_t=rep_start)
        if state.current_level is not FeedbackLevel.COME_ON:
            state = _tally_level(replace(state, current_level=FeedbackLevel.COME_ON), FeedbackLevel.COME_ON)
            em.emit("level_changed", t, level=FeedbackLevel.COME_ON.value, aggregate=0.0, timed_out=True)
        return _complete_rep(state, em, t, 0.0, timed_out=True)

    dt = t - state.last_t_ms if state.rep_start_t is not None else 0
    state, aggregate, level = _score_and_signal(state, em, spec, frame)
    good = level.rank >= FeedbackLevel.GOOD.rank
    sustain = state.rep_sustain_ms
    if good and state.prev_level_ok and state.rep_start_t is not None:
        sustain += dt
    elif not good:
        sustain = 0
    state = replace(
        state,
        last_t_ms=t,
        rep_start_t=rep_start,
        rep_sustain_ms=sustain,
        rep_best=max(state.rep_best, aggregate),
        prev_level_ok=good,
    )
    if sustain >= spec.hold_ms:
        return _complete_rep(state, em, t, state.rep_best, timed_out=False)
    return state


def _finalize_segment(state: SessionState, em: _Emitter, t_ms: int | None) -> SessionState:
    seg = state.timeline.segments[state.seg_index]
    spec = state.spec_for(seg.exercise_id)
    score = state.seg_sum / state.seg_count if state.seg_count else 0.0
    record = SegmentScore(seg.index, seg.exercise_id, spec.facial_region.value, score, state.seg_count)
    em.emit(
        "segment_completed",
        t_ms,
        segment_index=seg.index,
        exercise_id=seg.exercise_id,
        score=score,
        frame_count=state.seg_count,
    )
    return replace(
        state,
        segment_scores=state.segment_scores + (record,),
        seg_sum=0.0,
        seg_count=0,
        seg_index=state.seg_index + 1,
    )


def _announce_segment(state: SessionState, em: _Emitter, t_ms: int | None) -> None:
    seg = state.timeline.segments[state.seg_index]
    em.emit(
        "segment_started",
        t_ms,
        segment_index=seg.index,
        exercise_id=seg.exercise_id,
        opera_track_id=seg.opera_track_id,
        start_ms=seg.start_ms,
        end_ms=seg.end_ms,
    )


def _segment_frame(state: SessionState, em: _Emitter, frame: AUFrame) -> SessionState:
    _validate_session_frame(state, frame)
    t = frame.t_ms
    timeline = state.timeline
    epoch = state.timeline_epoch_ms
    if epoch is None:
        epoch = t
        state = replace(state, timeline_epoch_ms=epoch)
        _announce_segment(state, em, t)
    rel = t - epoch

    if rel >= timeline.duration_ms:
        # timeline over: flush every remaining segment, frame is not scored
        state = replace(state, last_t_ms=t)
        while state.seg_index < len(timeline.segments):
            state = _finalize_segment(state, em, t)
        em.emit("session_completed", t)
        return _move(state, Phase.COMPLETE, t, current_level=None)

    target = rel // SEGMENT_MS
    while state.seg_index < target:
        state = _finalize_segment(state, em, t)
        if state.seg_index == target:
            state = replace(state, current_level=None)
            _announce_segment(state, em, t)
    spec = state.spec_for(timeline.segments[state.seg_index].exercise_id)
    state, aggregate, _level = _score_and_signal(state, em, spec, frame)
    return replace(
        state,
        last_t_ms=t,
        seg_sum=state.seg_sum + aggregate,
        seg_count=state.seg_count + 1,
    )


def advance_session(state: SessionState, event: SessionEvent) -> tuple[SessionState, list[FeedbackEvent]]:
    """Apply one event. Raises IllegalEvent / NonMonotoneFrame (and leaves
    the input state untouched) when the event is not legal in this phase."""
    em = _Emitter(state)
    name = event_name(event)
    phase = state.phase

    if phase in TERMINAL_PHASES:
        raise IllegalEvent(phase.value, name, "session is finished")

    if isinstance(event, Abort):
        em.emit("session_aborted", None)
        new = _move(state, Phase.ABORTED, None)

    elif isinstance(event, StartBaseline):
        if phase is not Phase.IDLE:
            raise IllegalEvent(phase.value, name)
        em.emit("baseline_started", None, min_frames=state.min_baseline_frames)
        new = _move(state, Phase.BASELINE_CAPTURE, None)

    elif isinstance(event, BaselineFrame):
        if phase is not Phase.BASELINE_CAPTURE:
            raise IllegalEvent(phase.value, name)
        _validate_session_frame(state, event.frame)
        new = replace(
            state,
            baseline_frames=state.baseline_frames + (event.frame,),
            au_set=state.au_set or event.frame.au_set(),
            last_t_ms=event.frame.t_ms,
        )

    elif isinstance(event, (StartExercise, InstructionDone)) and phase is Phase.BASELINE_CAPTURE:
        # leaving baseline capture: basic names its first exercise, advanced
        # acknowledges with InstructionDone
        if state.mode is Mode.BASIC:
            if not isinstance(event, StartExercise):
                raise IllegalEvent(phase.value, name, "basic sessions leave baseline via start_exercise")
            if event.exercise_id != state.plan[0].id:
                raise IllegalEvent(phase.value, name, f"first planned exercise is {state.plan[0].id}")
        elif not isinstance(event, InstructionDone):
            raise IllegalEvent(phase.value, name, "advanced sessions leave baseline via instruction_done")
        if len(state.baseline_frames) < state.min_baseline_frames:
            raise IllegalEvent(
                phase.value, name,
                f"need {state.min_baseline_frames} baseline frames, have {len(state.baseline_frames)}",
            )
        baseline = capture_baseline(list(state.baseline_frames), state.min_baseline_frames)
        missing = _plan_target_aus(state) - set(baseline.values)
        if missing:
            raise IllegalEvent(phase.value, name, f"baseline missing target AUs {sorted(missing)}")
        state = replace(state, baseline=baseline)
        em.emit("baseline_captured", None, frame_count=baseline.capture_frame_count, values=baseline.values)
        if state.mode is Mode.BASIC:
            new = _enter_exercise(state, em, 0, None)
        else:
            # the first segment is announced when its first frame arrives,
            # because the timeline clock starts on that frame
            new = _move(state, Phase.SEGMENT_ACTIVE, None)

    elif isinstance(event, InstructionDone):
        if phase is Phase.INSTRUCTION:
            new = _start_rep(state, em, None)
        elif phase is Phase.REP_FEEDBACK:
            new = _start_rep(state, em, None)
        else:
            raise IllegalEvent(phase.value, name)

    elif isinstance(event, Frame):
        if phase is Phase.EXERCISING:
            new = _exercising_frame(state, em, event.frame)
        elif phase is Phase.SEGMENT_ACTIVE:
            new = _segment_frame(state, em, event.frame)
        else:
            raise IllegalEvent(phase.value, name)

    elif isinstance(event, Skip):
        if state.mode is Mode.BASIC and phase in (Phase.INSTRUCTION, Phase.EXERCISING, Phase.REP_FEEDBACK):
            em.emit("exercise_skipped", None, exercise_id=state.current_exercise().id)
            nxt = state.exercise_idx + 1
            if nxt < len(state.plan):
                new = _enter_exercise(state, em, nxt, None)
            else:
                em.emit("session_completed", None)
                new = _move(state, Phase.COMPLETE, None)
        else:
            raise IllegalEvent(phase.value, name)

    elif isinstance(event, StartExercise):
        raise IllegalEvent(phase.value, name)

    else:  # pragma: no cover - event union is closed
        raise IllegalEvent(phase.value, name)

    return replace(new, event_seq=em.base_seq + len(em.events)), em.events


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    patient_id: str
    mode: Mode
    started_at: str
    overall_score: int
    no_activity: bool
    completed: bool
    rep_scores: tuple[RepScore, ...]
    segment_scores: tuple[SegmentScore, ...]
    region_means: dict[str, float]
    feedback_event_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "patient_id": self.patient_id,
            "mode": self.mode.value,
            "started_at": self.started_at,
            "overall_score": self.overall_score,
            "no_activity": self.no_activity,
            "completed": self.completed,
            "rep_scores": [
                {
                    "exercise_id": r.exercise_id,
                    "region": r.region,
                    "rep_index": r.rep_index,
                    "score": r.score,
                    "timed_out": r.timed_out,
                }
                for r in self.rep_scores
            ],
            "segment_scores": [
                {
                    "segment_index": s.segment_index,
                    "exercise_id": s.exercise_id,
                    "region": s.region,
                    "score": s.score,
                    "frame_count": s.frame_count,
                }
                for s in self.segment_scores
            ],
            "region_means": dict(sorted(self.region_means.items())),
            "feedback_event_counts": dict(sorted(self.feedback_event_counts.items())),
        }


def report_from_dict(payload: dict) -> SessionReport:
    return SessionReport(
        session_id=payload["session_id"],
        patient_id=payload["patient_id"],
        mode=Mode(payload["mode"]),
        started_at=payload["started_at"],
        overall_score=int(payload["overall_score"]),
        no_activity=bool(payload["no_activity"]),
        completed=bool(payload["completed"]),
        rep_scores=tuple(
            RepScore(r["exercise_id"], r["region"], r["rep_index"], r["score"], r["timed_out"])
            for r in payload.get("rep_scores", [])
        ),
        segment_scores=tuple(
            SegmentScore(s["segment_index"], s["exercise_id"], s["region"], s["score"], s["frame_count"])
            for s in payload.get("segment_scores", [])
        ),
        region_means=dict(payload.get("region_means", {})),
        feedback_event_counts=dict(payload.get("feedback_event_counts", {})),
    )


def canonical_report_json(report: SessionReport) -> bytes:
    """Stable byte encoding: sorted keys, no whitespace, trailing newline."""
    return (json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def overall_score(aggregates: list[float]) -> int:
    """round(100 * mean), half away from zero; 0 when nothing was scored."""
    if not aggregates:
        return 0
    value = 100.0 * sum(aggregates) / len(aggregates)
    return int(value + 0.5)


def finalize_session(state: SessionState) -> SessionReport:
    if state.phase not in TERMINAL_PHASES:
        raise HypomimiaCoachError(f"cannot finalize session in phase {state.phase.value}")
    if state.mode is Mode.BASIC:
        scored = [(r.region, r.score) for r in state.rep_scores]
        segment_scores: tuple[SegmentScore, ...] = ()
        rep_scores = state.rep_scores
        no_activity = not state.rep_scores
    else:
        # completion flushes every timeline segment (empty ones score 0);
        # an abort additionally keeps the partially played segment
        pending = list(state.segment_scores)
        if (
            state.phase is Phase.ABORTED
            and state.timeline_epoch_ms is not None
            and state.seg_index < len(state.timeline.segments)
            and state.seg_count > 0
        ):
            seg = state.timeline.segments[state.seg_index]
            spec = state.spec_for(seg.exercise_id)
            pending.append(
                SegmentScore(
                    seg.index,
                    seg.exercise_id,
                    spec.facial_region.value,
                    state.seg_sum / state.seg_count,
                    state.seg_count,
                )
            )
        segment_scores = tuple(pending)
        scored = [(s.region, s.score) for s in segment_scores]
        rep_scores = ()
        no_activity = state.frames_scored == 0

    aggregates = [score for _, score in scored]
    region_means: dict[str, float] = {}
    for region in sorted({region for region, _ in scored}):
        values = [score for r, score in scored if r == region]
        region_means[region] = sum(values) / len(values)

    levels = ("come_on", "good", "perfect")
    return SessionReport(
        session_id=state.session_id,
        patient_id=state.patient_id,
        mode=state.mode,
        started_at=state.started_at,
        overall_score=0 if no_activity else overall_score(aggregates),
        no_activity=no_activity,
        completed=state.phase is Phase.COMPLETE,
        rep_scores=rep_scores,
        segment_scores=segment_scores,
        region_means=region_means,
        feedback_event_counts={name: state.level_counts[i] for i, name in enumerate(levels)},
    )


# --------------------------------------------------------------- event log
#
# A session log is replayable JSONL: one header record, then one record per
# accepted engine event.


def session_header_record(state: SessionState) -> dict:
    record = {
        "type": "session",
        "v": 1,
        "session_id": state.session_id,
        "patient_id": state.patient_id,
        "mode": state.mode.value,
        "started_at": state.started_at,
        "min_baseline_frames": state.min_baseline_frames,
    }
    if state.mode is Mode.BASIC:
        record["exercise_ids"] = [spec.id for spec in state.plan]
    else:
        record["duration_ms"] = state.timeline.duration_ms
        record["difficulty"] = state.timeline.difficulty.value
        record["timeline_seed"] = state.timeline.seed
    return record


def event_to_record(event: SessionEvent) -> dict:
    record: dict = {"type": "event", "event": event_name(event)}
    if isinstance(event, (BaselineFrame, Frame)):
        record["frame"] = frame_to_record(event.frame)
    elif isinstance(event, StartExercise):
        record["exercise_id"] = event.exercise_id
    return record


def record_to_event(record: dict) -> SessionEvent:
    name = record.get("event")
    if name == "start_baseline":
        return StartBaseline()
    if name == "baseline_frame":
        return BaselineFrame(record_to_frame(record["frame"]))
    if name == "start_exercise":
        return StartExercise(record["exercise_id"])
    if name == "instruction_done":
        return InstructionDone()
    if name == "frame":
        return Frame(record_to_frame(record["frame"]))
    if name == "skip":
        return Skip()
    if name == "abort":
        return Abort()
    raise HypomimiaCoachError(f"unknown event record {name!r}")


def state_from_header(record: dict, catalog: ExerciseCatalog) -> SessionState:
    mode = Mode(record["mode"])
    common = dict(
        session_id=record["session_id"],
        patient_id=record["patient_id"],
        started_at=record["started_at"],
        min_baseline_frames=int(record.get("min_baseline_frames", DEFAULT_MIN_BASELINE_FRAMES)),
    )
    if mode is Mode.BASIC:
        exercises = [catalog.get(eid) for eid in record["exercise_ids"]]
        return new_basic_session(exercises=exercises, **common)
    timeline = build_advanced_timeline(
        catalog, int(record["duration_ms"]), Difficulty(record["difficulty"]), int(record["timeline_seed"])
    )
    return new_advanced_session(timeline=timeline, catalog=catalog, **common)


def replay_session_log(
    lines: Iterable[bytes] | bytes, catalog: ExerciseCatalog
) -> tuple[SessionReport, list[FeedbackEvent]]:
    """Rebuild a session from its JSONL log. Unfinished sessions finalize as
    aborted, mirroring the live service's behavior."""
    if isinstance(lines, bytes):
        lines = lines.splitlines()
    state: SessionState | None = None
    all_events: list[FeedbackEvent] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        record = json.loads(line.decode("utf-8") if isinstance(line, bytes) else line)
        if record.get("type") == "session":
            if state is not None:
                raise HypomimiaCoachError(f"line {line_no}: duplicate session header")
            state = state_from_header(record, catalog)
        elif record.get("type") == "event":
            if state is None:
                raise HypomimiaCoachError(f"line {line_no}: event before session header")
            state, events = advance_session(state, record_to_event(record))
            all_events.extend(events)
        else:
            raise HypomimiaCoachError(f"line {line_no}: unknown record type {record.get('type')!r}")
    if state is None:
        raise HypomimiaCoachError("log contains no session header")
    if state.phase not in TERMINAL_PHASES:
        state, events = advance_session(state, Abort())
        all_events.extend(events)
    return finalize_session(state), all_events
