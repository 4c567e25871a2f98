// Patient training view state: a pure function of (session descriptor,
// feedback events so far, latest frame, final report). All levels and
// scores come from service events and reports - the client never computes
// them.

import {
    AUFrameRecord,
    ExerciseInfo,
    FeedbackEvent,
    FeedbackLevel,
    SessionDescriptor,
    SessionReport,
} from "./types.js";

export interface BannerState {
    level: FeedbackLevel;
    text: string;
    color: string;
}

export const BANNERS: Record<FeedbackLevel, BannerState> = {
    perfect: { level: "perfect", text: "Perfect", color: "green" },
    good: { level: "good", text: "Good", color: "amber" },
    come_on: { level: "come_on", text: "Come on", color: "blue" },
};

export interface LiveBar {
    au: string;
    current: number;
    baseline: number;
    target: number;
}

export interface RepRow {
    repIndex: number;
    score: number;
    timedOut: boolean;
}

export interface SegmentRow {
    index: number;
    exerciseId: string;
    operaTrackId: string;
    startMs: number;
    endMs: number;
    beatMs: number[];
    score: number | null;
    frameCount: number | null;
    active: boolean;
}

export interface PatientViewState {
    phase: string;
    banner: BannerState | null;
    lastAggregate: number | null;
    exerciseId: string | null;
    instructionText: string;
    repsPlanned: number;
    currentRep: number;
    reps: RepRow[];
    segments: SegmentRow[];
    baseline: Record<string, number> | null;
    baselineFramesSeen: number;
    baselineFramesNeeded: number;
    latestFrame: AUFrameRecord | null;
    finalScore: number | null;
    sessionOver: boolean;
    aborted: boolean;
    notice: string | null;
    lastSeq: number;
}

export function initialViewState(descriptor: SessionDescriptor): PatientViewState {
    const segments: SegmentRow[] = (descriptor.timeline?.segments ?? []).map((segment) => ({
        index: segment.index,
        exerciseId: segment.exercise_id,
        operaTrackId: segment.opera_track_id,
        startMs: segment.start_ms,
        endMs: segment.end_ms,
        beatMs: segment.beat_ms,
        score: null,
        frameCount: null,
        active: false,
    }));
    return {
        phase: descriptor.phase,
        banner: null,
        lastAggregate: null,
        exerciseId: null,
        instructionText: "",
        repsPlanned: 0,
        currentRep: 0,
        reps: [],
        segments,
        baseline: null,
        baselineFramesSeen: 0,
        baselineFramesNeeded: descriptor.min_baseline_frames,
        latestFrame: null,
        finalScore: null,
        sessionOver: false,
        aborted: false,
        notice: null,
        lastSeq: 0,
    };
}

function asNumber(value: unknown, fallback = 0): number {
    return typeof value === "number" ? value : fallback;
}

function asString(value: unknown, fallback = ""): string {
    return typeof value === "string" ? value : fallback;
}

export function applyEvent(
    state: PatientViewState,
    event: FeedbackEvent,
    exercises: Map<string, ExerciseInfo>,
): PatientViewState {
    const next: PatientViewState = { ...state, reps: [...state.reps], segments: [...state.segments] };
    next.lastSeq = Math.max(state.lastSeq, event.seq);
    const data = event.data;

    switch (event.kind) {
        case "baseline_started":
            next.phase = "baseline_capture";
            next.baselineFramesNeeded = asNumber(data["min_frames"], state.baselineFramesNeeded);
            break;
        case "baseline_captured":
            next.baseline = (data["values"] as Record<string, number>) ?? null;
            next.baselineFramesSeen = asNumber(data["frame_count"]);
            break;
        case "exercise_started": {
            const exerciseId = asString(data["exercise_id"]);
            next.phase = "instruction";
            next.exerciseId = exerciseId;
            next.instructionText = asString(data["instruction_text"]);
            next.repsPlanned = exercises.get(exerciseId)?.reps ?? 0;
            next.currentRep = 0;
            next.banner = null;
            break;
        }
        case "rep_started":
            next.phase = "exercising";
            next.currentRep = asNumber(data["rep_index"], 1);
            next.banner = null;
            next.lastAggregate = null;
            break;
        case "level_changed": {
            const level = asString(data["level"]) as FeedbackLevel;
            next.banner = BANNERS[level] ?? null;
            next.lastAggregate = asNumber(data["aggregate"], 0);
            break;
        }
        case "rep_completed":
            next.reps.push({
                repIndex: asNumber(data["rep_index"], next.reps.length + 1),
                score: asNumber(data["score"]),
                timedOut: data["timed_out"] === true,
            });
            next.phase = "rep_feedback";
            break;
        case "exercise_completed":
            next.phase = "instruction";
            break;
        case "exercise_skipped":
            break;
        case "segment_started": {
            const index = asNumber(data["segment_index"], -1);
            next.phase = "segment_active";
            next.segments = next.segments.map((segment) => ({
                ...segment,
                active: segment.index === index,
            }));
            next.banner = null;
            break;
        }
        case "segment_completed": {
            const index = asNumber(data["segment_index"], -1);
            next.segments = next.segments.map((segment) =>
                segment.index === index
                    ? {
                          ...segment,
                          score: asNumber(data["score"]),
                          frameCount: asNumber(data["frame_count"]),
                          active: false,
                      }
                    : segment,
            );
            break;
        }
        case "session_completed":
            next.phase = "complete";
            next.sessionOver = true;
            break;
        case "session_aborted":
            next.phase = "aborted";
            next.sessionOver = true;
            next.aborted = true;
            break;
        default:
            break;
    }
    return next;
}

export function applyFrameSent(state: PatientViewState, frame: AUFrameRecord): PatientViewState {
    const next = { ...state, latestFrame: frame };
    if (state.phase === "baseline_capture") {
        next.baselineFramesSeen = state.baselineFramesSeen + 1;
    }
    return next;
}

export function applyReport(state: PatientViewState, report: SessionReport): PatientViewState {
    // the displayed final score is the report's overall_score verbatim
    return {
        ...state,
        finalScore: report.overall_score,
        sessionOver: true,
        phase: report.completed ? "complete" : "aborted",
        aborted: !report.completed,
    };
}

export function viewFromEvents(
    descriptor: SessionDescriptor,
    events: FeedbackEvent[],
    exercises: Map<string, ExerciseInfo>,
    latestFrame: AUFrameRecord | null = null,
    report: SessionReport | null = null,
): PatientViewState {
    let state = initialViewState(descriptor);
    for (const event of events) {
        state = applyEvent(state, event, exercises);
    }
    if (latestFrame) {
        state = applyFrameSent(state, latestFrame);
    }
    if (report) {
        state = applyReport(state, report);
    }
    return state;
}

export function liveBars(
    state: PatientViewState,
    exercises: Map<string, ExerciseInfo>,
): LiveBar[] {
    const activeExerciseId =
        state.phase === "segment_active"
            ? state.segments.find((segment) => segment.active)?.exerciseId ?? null
            : state.exerciseId;
    if (!activeExerciseId) {
        return [];
    }
    const exercise = exercises.get(activeExerciseId);
    if (!exercise) {
        return [];
    }
    return Object.entries(exercise.target_aus).map(([au, target]) => ({
        au,
        current: state.latestFrame?.au[au] ?? 0,
        baseline: state.baseline?.[au] ?? 0,
        target,
    }));
}

export function sessionExpiredNotice(state: PatientViewState, reportUrl: string): PatientViewState {
    return {
        ...state,
        sessionOver: true,
        notice: `Session ended. See the report at ${reportUrl}`,
    };
}
