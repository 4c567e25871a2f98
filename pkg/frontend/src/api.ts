// Thin typed client over the service endpoints. Fetch is injectable so
// tests can run without a network.

import {
    ApiError,
    AUFrameRecord,
    EventsPayload,
    ExerciseInfo,
    PatientAggregate,
    SessionDescriptor,
    SessionReport,
    isApiError,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
    constructor(
        public readonly code: string,
        public readonly detail: string,
        public readonly status: number,
    ) {
        super(`${code}: ${detail}`);
    }
}

export type AdvanceAction = "start_exercise" | "continue" | "skip" | "abort";

export class ApiClient {
    constructor(
        private baseUrl: string = "",
        private token: string | null = null,
        private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const headers: Record<string, string> = { "Content-Type": "application/json" };
        if (this.token) {
            headers["X-API-Token"] = this.token;
        }
        const response = await this.fetchImpl(this.baseUrl + path, {
            method,
            headers,
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const payload: unknown = await response.json();
        if (!response.ok) {
            if (isApiError(payload)) {
                throw new ApiRequestError(payload.error.code, payload.error.detail, response.status);
            }
            throw new ApiRequestError("http_error", `status ${response.status}`, response.status);
        }
        return payload as T;
    }

    createPatient(alias: string): Promise<{ patient_id: string; alias: string }> {
        return this.request("POST", "/patients", { alias });
    }

    listExercises(): Promise<{ exercises: ExerciseInfo[] }> {
        return this.request("GET", "/exercises");
    }

    createSession(
        patientId: string,
        mode: "basic" | "advanced",
        config: Record<string, unknown>,
    ): Promise<SessionDescriptor> {
        return this.request("POST", "/sessions", { patient_id: patientId, mode, config });
    }

    startBaseline(sessionId: string): Promise<EventsPayload> {
        return this.request("POST", `/sessions/${sessionId}/baseline/start`);
    }

    postFrame(sessionId: string, frame: AUFrameRecord): Promise<EventsPayload> {
        return this.request("POST", `/sessions/${sessionId}/frames`, frame);
    }

    advance(sessionId: string, action: AdvanceAction, exerciseId?: string): Promise<EventsPayload> {
        return this.request("POST", `/sessions/${sessionId}/advance`, {
            action,
            exercise_id: exerciseId,
        });
    }

    pollEvents(sessionId: string, since: number): Promise<EventsPayload> {
        return this.request("GET", `/sessions/${sessionId}/events?since=${since}`);
    }

    completeSession(sessionId: string): Promise<SessionReport> {
        return this.request("POST", `/sessions/${sessionId}/complete`);
    }

    patientReport(patientId: string): Promise<{ patient_id: string; sessions: SessionReport[] }> {
        return this.request("GET", `/patients/${patientId}/report`);
    }

    patientAggregate(patientId: string): Promise<PatientAggregate> {
        return this.request("GET", `/patients/${patientId}/aggregate`);
    }

    detect(body: { frames?: AUFrameRecord[]; features?: number[][] }): Promise<{
        label: string;
        probability: number;
        model_version: string | null;
    }> {
        return this.request("POST", "/detect", body);
    }
}
