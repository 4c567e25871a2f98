// AU-frame input drivers. The loop is operable without any camera stack:
// sliders emit frames at a fixed rate, the replay driver feeds a recorded
// session log, and ExternalDriver is the seam for a real extractor.

import { AUFrameRecord, EventsPayload } from "./types.js";

// Frame schema used by the drivers: the 8 detection AUs plus every catalog
// code, matching the backend's canonical set.
export const CANONICAL_AUS: string[] = [
    "AU1", "AU2", "AU4", "AU5", "AU6", "AU9", "AU12", "AU13", "AU18",
    "AU19", "AU24", "AU25", "AU26", "AU27", "AU28", "AU33", "AU44",
];

export type FramePoster = (frame: AUFrameRecord) => Promise<EventsPayload>;

export interface InputDriver {
    readonly kind: "sliders" | "replay" | "external";
    stop(): void;
}

function fullFrame(t_ms: number, values: Record<string, number>): AUFrameRecord {
    const au: Record<string, number> = {};
    for (const code of CANONICAL_AUS) {
        const value = values[code] ?? 0;
        au[code] = Math.min(1, Math.max(0, value));
    }
    return { t_ms, au };
}

/**
 * Emits one schema-valid frame per tick (default 10 frames/s) built from
 * the current slider positions; t_ms is strictly monotone. At most one
 * frame post is in flight at a time - ticks that would overlap are
 * dropped rather than queued.
 */
export class SliderDriver implements InputDriver {
    readonly kind = "sliders";
    private t_ms = 0;
    private timer: ReturnType<typeof setInterval> | null = null;
    private inFlight = false;

    constructor(
        private readValues: () => Record<string, number>,
        private post: FramePoster,
        private onEvents: (payload: EventsPayload) => void,
        private intervalMs = 100,
        private onError: (error: unknown) => void = () => {},
    ) {}

    start(): void {
        if (this.timer === null) {
            this.timer = setInterval(() => void this.tick(), this.intervalMs);
        }
    }

    stop(): void {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }

    /** One emission interval; exposed for deterministic tests. */
    async tick(): Promise<void> {
        if (this.inFlight) {
            return;
        }
        this.inFlight = true;
        this.t_ms += this.intervalMs;
        try {
            const payload = await this.post(fullFrame(this.t_ms, this.readValues()));
            this.onEvents(payload);
        } catch (error) {
            this.onError(error);
        } finally {
            this.inFlight = false;
        }
    }
}

export interface ReplayRecord {
    type: string;
    event?: string;
    frame?: AUFrameRecord;
    exercise_id?: string;
    [key: string]: unknown;
}

export function parseSessionLog(text: string): ReplayRecord[] {
    return text
        .split("\n")
        .map((line) => line.trim())
        .filter((line) => line.length > 0)
        .map((line) => JSON.parse(line) as ReplayRecord);
}

export interface ReplayActions {
    startBaseline(): Promise<EventsPayload>;
    postFrame(frame: AUFrameRecord): Promise<EventsPayload>;
    advance(action: "start_exercise" | "continue" | "skip" | "abort", exerciseId?: string): Promise<EventsPayload>;
}

/**
 * Feeds a recorded session log through the live service. Frame pacing
 * follows the log's own timestamps scaled by `speed` (0 = as fast as the
 * service answers, which is what the tests use).
 */
export class ReplayDriver implements InputDriver {
    readonly kind = "replay";
    private stopped = false;

    constructor(
        private records: ReplayRecord[],
        private actions: ReplayActions,
        private onEvents: (payload: EventsPayload) => void,
        private speed = 0,
        private sleep: (ms: number) => Promise<void> = (ms) =>
            new Promise((resolve) => setTimeout(resolve, ms)),
    ) {}

    stop(): void {
        this.stopped = true;
    }

    async run(): Promise<void> {
        let lastT: number | null = null;
        for (const record of this.records) {
            if (this.stopped) {
                return;
            }
            if (record.type !== "event" || !record.event) {
                continue;
            }
            let payload: EventsPayload | null = null;
            switch (record.event) {
                case "start_baseline":
                    payload = await this.actions.startBaseline();
                    break;
                case "baseline_frame":
                case "frame": {
                    const frame = record.frame!;
                    if (this.speed > 0 && lastT !== null && frame.t_ms > lastT) {
                        await this.sleep((frame.t_ms - lastT) / this.speed);
                    }
                    lastT = frame.t_ms;
                    payload = await this.actions.postFrame(frame);
                    break;
                }
                case "start_exercise":
                    payload = await this.actions.advance("start_exercise", record.exercise_id);
                    break;
                case "instruction_done":
                    payload = await this.actions.advance("continue");
                    break;
                case "skip":
                    payload = await this.actions.advance("skip");
                    break;
                case "abort":
                    payload = await this.actions.advance("abort");
                    break;
                default:
                    throw new Error(`unknown log event ${record.event}`);
            }
            if (payload) {
                this.onEvents(payload);
            }
        }
    }
}

/** Seam for a real AU extractor: anything that pushes frames in. */
export class ExternalDriver implements InputDriver {
    readonly kind = "external";
    private t_last = -1;

    constructor(
        private post: FramePoster,
        private onEvents: (payload: EventsPayload) => void,
    ) {}

    stop(): void {}

    async push(frame: AUFrameRecord): Promise<void> {
        if (frame.t_ms <= this.t_last) {
            throw new Error(`frame t_ms ${frame.t_ms} is not monotone`);
        }
        this.t_last = frame.t_ms;
        this.onEvents(await this.post(frame));
    }
}
