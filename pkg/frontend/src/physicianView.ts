// Physician dashboard view state: per-region cards with mean + trend, a
// session table sorted by date, and drill-down into one stored report.
// Every number shown comes from the aggregate endpoint or stored reports.

import { PatientAggregate, SessionReport } from "./types.js";

export interface RegionCard {
    region: string;
    meanLabel: string; // e.g. "0.70"
    mean: number;
    trend: number;
    trendLabel: string; // "improving" | "declining" | "flat"
    sessionCount: number;
}

export interface SessionRow {
    sessionId: string;
    startedAt: string;
    mode: string;
    overallScore: number;
    completed: boolean;
}

export interface DashboardState {
    patientId: string | null;
    cards: RegionCard[];
    sessions: SessionRow[];
    selected: SessionReport | null;
    emptyMessage: string | null;
    errorCode: string | null;
    errorDetail: string | null;
}

export function emptyDashboard(): DashboardState {
    return {
        patientId: null,
        cards: [],
        sessions: [],
        selected: null,
        emptyMessage: null,
        errorCode: null,
        errorDetail: null,
    };
}

export function formatMean(mean: number): string {
    return mean.toFixed(2);
}

export function trendLabel(trend: number, epsilon = 1e-9): string {
    if (trend > epsilon) {
        return "improving";
    }
    if (trend < -epsilon) {
        return "declining";
    }
    return "flat";
}

export function dashboardFromAggregate(
    aggregate: PatientAggregate,
    sessions: SessionReport[],
): DashboardState {
    const cards = Object.values(aggregate.regions)
        .map((region) => ({
            region: region.facial_region,
            meanLabel: formatMean(region.mean_achievement),
            mean: region.mean_achievement,
            trend: region.trend,
            trendLabel: trendLabel(region.trend),
            sessionCount: region.session_count,
        }))
        .sort((a, b) => a.region.localeCompare(b.region));
    const rows = sessions
        .map((report) => ({
            sessionId: report.session_id,
            startedAt: report.started_at,
            mode: report.mode,
            overallScore: report.overall_score,
            completed: report.completed,
        }))
        .sort((a, b) => a.startedAt.localeCompare(b.startedAt));
    return {
        patientId: aggregate.patient_id,
        cards,
        sessions: rows,
        selected: null,
        emptyMessage: cards.length === 0 ? "No sessions recorded yet." : null,
        errorCode: null,
        errorDetail: null,
    };
}

export function dashboardEmptyState(patientId: string): DashboardState {
    return {
        ...emptyDashboard(),
        patientId,
        emptyMessage: "No sessions recorded yet.",
    };
}

export function dashboardError(code: string, detail: string): DashboardState {
    return { ...emptyDashboard(), errorCode: code, errorDetail: detail };
}

export function selectSession(
    state: DashboardState,
    sessions: SessionReport[],
    sessionId: string,
): DashboardState {
    return {
        ...state,
        selected: sessions.find((report) => report.session_id === sessionId) ?? null,
    };
}
