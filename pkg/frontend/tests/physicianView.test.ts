import { describe, expect, it } from "vitest";

import {
    dashboardEmptyState,
    dashboardError,
    dashboardFromAggregate,
    formatMean,
    selectSession,
    trendLabel,
} from "../src/physicianView.js";
import { PatientAggregate, SessionReport } from "../src/types.js";

function report(sessionId: string, startedAt: string, lipMean: number, overall: number): SessionReport {
    return {
        v: 1,
        session_id: sessionId,
        patient_id: "p1",
        mode: "basic",
        started_at: startedAt,
        overall_score: overall,
        no_activity: false,
        completed: true,
        rep_scores: [],
        segment_scores: [],
        region_means: { lip: lipMean },
        feedback_event_counts: { perfect: 1, good: 1, come_on: 1 },
    };
}

describe("physician dashboard", () => {
    it("renders the lip card as 0.70 for stored session means [0.8, 0.6]", () => {
        // the aggregate endpoint averages the two stored sessions to 0.7
        const aggregate: PatientAggregate = {
            patient_id: "p1",
            regions: {
                lip: { facial_region: "lip", session_count: 2, mean_achievement: 0.7, trend: -0.2 },
            },
        };
        const sessions = [
            report("s1", "2026-08-01T00:00:00Z", 0.8, 80),
            report("s2", "2026-08-02T00:00:00Z", 0.6, 60),
        ];
        const state = dashboardFromAggregate(aggregate, sessions);
        const lip = state.cards.find((card) => card.region === "lip");
        expect(lip?.meanLabel).toBe("0.70");
        expect(lip?.sessionCount).toBe(2);
        expect(lip?.trendLabel).toBe("declining");
    });

    it("renders a single session as a flat trend", () => {
        const aggregate: PatientAggregate = {
            patient_id: "p1",
            regions: {
                lip: { facial_region: "lip", session_count: 1, mean_achievement: 0.8, trend: 0.0 },
            },
        };
        const state = dashboardFromAggregate(aggregate, [report("s1", "2026-08-01T00:00:00Z", 0.8, 80)]);
        expect(state.cards[0]?.trendLabel).toBe("flat");
    });

    it("sorts the session table by start date", () => {
        const aggregate: PatientAggregate = {
            patient_id: "p1",
            regions: {
                lip: { facial_region: "lip", session_count: 3, mean_achievement: 0.5, trend: 0.1 },
            },
        };
        const sessions = [
            report("later", "2026-08-03T00:00:00Z", 0.5, 50),
            report("first", "2026-08-01T00:00:00Z", 0.5, 50),
            report("middle", "2026-08-02T00:00:00Z", 0.5, 50),
        ];
        const state = dashboardFromAggregate(aggregate, sessions);
        expect(state.sessions.map((row) => row.sessionId)).toEqual(["first", "middle", "later"]);
    });

    it("supports drill-down into one stored report", () => {
        const aggregate: PatientAggregate = {
            patient_id: "p1",
            regions: {
                lip: { facial_region: "lip", session_count: 1, mean_achievement: 0.8, trend: 0 },
            },
        };
        const sessions = [report("s1", "2026-08-01T00:00:00Z", 0.8, 80)];
        let state = dashboardFromAggregate(aggregate, sessions);
        state = selectSession(state, sessions, "s1");
        expect(state.selected?.overall_score).toBe(80);
        state = selectSession(state, sessions, "missing");
        expect(state.selected).toBeNull();
    });

    it("shows an empty state without sessions and passes API errors through", () => {
        const empty = dashboardEmptyState("p1");
        expect(empty.emptyMessage).toMatch(/No sessions/);
        const failed = dashboardError("unknown_patient", "unknown patient ghost");
        expect(failed.errorCode).toBe("unknown_patient");
        expect(failed.errorDetail).toContain("ghost");
    });

    it("formats means to two decimals", () => {
        expect(formatMean(0.7)).toBe("0.70");
        expect(formatMean(1)).toBe("1.00");
        expect(formatMean(0.666)).toBe("0.67");
        expect(trendLabel(0.2)).toBe("improving");
        expect(trendLabel(-0.2)).toBe("declining");
        expect(trendLabel(0)).toBe("flat");
    });
});
