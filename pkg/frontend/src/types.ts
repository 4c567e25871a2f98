// Wire types for the hypomimiacoach HTTP API (see docs/api.md in the repo
// root). The client renders these; it never derives scores itself.

export interface AUFrameRecord {
    t_ms: number;
    au: Record<string, number>;
}

export type FeedbackLevel = "perfect" | "good" | "come_on";

export interface FeedbackEvent {
    seq: number;
    kind: string;
    t_ms: number | null;
    data: Record<string, unknown>;
}

export interface ExerciseInfo {
    id: string;
    facial_region: string;
    target_aus: Record<string, number>;
    reps: number;
    hold_ms: number;
    timeout_ms: number;
    instruction_text: string;
    instruction_media: string;
}

export interface TimelineSegmentInfo {
    index: number;
    start_ms: number;
    end_ms: number;
    exercise_id: string;
    opera_track_id: string;
    beat_ms: number[];
}

export interface TimelineInfo {
    duration_ms: number;
    difficulty: "easy" | "hard";
    seed: number;
    segments: TimelineSegmentInfo[];
}

export interface SessionDescriptor {
    session_id: string;
    patient_id: string;
    mode: "basic" | "advanced";
    phase: string;
    started_at: string;
    min_baseline_frames: number;
    exercise_ids?: string[];
    timeline?: TimelineInfo;
}

export interface RepScoreRecord {
    exercise_id: string;
    region: string;
    rep_index: number;
    score: number;
    timed_out: boolean;
}

export interface SegmentScoreRecord {
    segment_index: number;
    exercise_id: string;
    region: string;
    score: number;
    frame_count: number;
}

export interface SessionReport {
    v: number;
    session_id: string;
    patient_id: string;
    mode: "basic" | "advanced";
    started_at: string;
    overall_score: number;
    no_activity: boolean;
    completed: boolean;
    rep_scores: RepScoreRecord[];
    segment_scores: SegmentScoreRecord[];
    region_means: Record<string, number>;
    feedback_event_counts: Record<string, number>;
}

export interface RegionAggregate {
    facial_region: string;
    session_count: number;
    mean_achievement: number;
    trend: number;
}

export interface PatientAggregate {
    patient_id: string;
    regions: Record<string, RegionAggregate>;
}

export interface ApiError {
    error: { code: string; detail: string };
}

export interface EventsPayload {
    events: FeedbackEvent[];
    phase: string;
}

export function isApiError(payload: unknown): payload is ApiError {
    return (
        typeof payload === "object" &&
        payload !== null &&
        "error" in payload &&
        typeof (payload as ApiError).error?.code === "string"
    );
}
