// Browser wiring: patient loop (sliders or replay driver against the live
// service) and the physician dashboard. Everything flows through ApiClient.

import { ApiClient, ApiRequestError } from "./api.js";
import { renderDashboard, renderPatientView } from "./dom.js";
import { CANONICAL_AUS, ReplayDriver, SliderDriver, parseSessionLog } from "./drivers.js";
import {
    PatientViewState,
    applyEvent,
    applyFrameSent,
    applyReport,
    initialViewState,
    liveBars,
    sessionExpiredNotice,
} from "./patientView.js";
import {
    dashboardEmptyState,
    dashboardError,
    dashboardFromAggregate,
    emptyDashboard,
    selectSession,
} from "./physicianView.js";
import { AUFrameRecord, EventsPayload, ExerciseInfo, SessionDescriptor } from "./types.js";

const api = new ApiClient("");

const patientRoot = document.getElementById("patient-view")!;
const dashboardRoot = document.getElementById("physician-view")!;
const slidersRoot = document.getElementById("sliders")!;
const controls = {
    alias: document.getElementById("alias") as HTMLInputElement,
    createPatient: document.getElementById("create-patient") as HTMLButtonElement,
    patientId: document.getElementById("patient-id") as HTMLInputElement,
    mode: document.getElementById("mode") as HTMLSelectElement,
    startSession: document.getElementById("start-session") as HTMLButtonElement,
    beginBaseline: document.getElementById("begin-baseline") as HTMLButtonElement,
    continueBtn: document.getElementById("continue") as HTMLButtonElement,
    completeBtn: document.getElementById("complete") as HTMLButtonElement,
    replayFile: document.getElementById("replay-file") as HTMLInputElement,
    runReplay: document.getElementById("run-replay") as HTMLButtonElement,
    loadDashboard: document.getElementById("load-dashboard") as HTMLButtonElement,
};

let exercises = new Map<string, ExerciseInfo>();
let descriptor: SessionDescriptor | null = null;
let view: PatientViewState | null = null;
let driver: SliderDriver | null = null;
const sliderValues: Record<string, number> = {};

function repaint(): void {
    if (view) {
        renderPatientView(patientRoot, view, liveBars(view, exercises));
    }
}

function absorb(payload: EventsPayload): void {
    if (!view) {
        return;
    }
    for (const event of payload.events) {
        view = applyEvent(view, event, exercises);
    }
    repaint();
}

async function loadExercises(): Promise<void> {
    const listing = await api.listExercises();
    exercises = new Map(listing.exercises.map((exercise) => [exercise.id, exercise]));
}

function buildSliders(): void {
    slidersRoot.replaceChildren();
    for (const au of CANONICAL_AUS) {
        sliderValues[au] = 0;
        const label = document.createElement("label");
        label.textContent = au;
        const input = document.createElement("input");
        input.type = "range";
        input.min = "0";
        input.max = "1";
        input.step = "0.01";
        input.value = "0";
        input.addEventListener("input", () => {
            sliderValues[au] = Number(input.value);
        });
        label.appendChild(input);
        slidersRoot.appendChild(label);
    }
}

async function startSession(): Promise<void> {
    const patientId = controls.patientId.value.trim();
    const mode = controls.mode.value as "basic" | "advanced";
    const config =
        mode === "basic"
            ? { exercise_ids: [...exercises.keys()].slice(0, 2) }
            : { duration_ms: 60000, difficulty: "easy" };
    descriptor = await api.createSession(patientId, mode, config);
    view = initialViewState(descriptor);
    driver?.stop();
    driver = new SliderDriver(
        () => sliderValues,
        (frame: AUFrameRecord) => api.postFrame(descriptor!.session_id, frame),
        absorb,
        100,
        (error) => {
            if (error instanceof ApiRequestError && error.code === "unknown_session" && view) {
                view = sessionExpiredNotice(view, `/patients/${descriptor!.patient_id}/report`);
                driver?.stop();
                repaint();
            }
        },
    );
    driver.start();
    repaint();
}

async function runReplay(): Promise<void> {
    const file = controls.replayFile.files?.[0];
    if (!file) {
        return;
    }
    const text = await file.text();
    const records = parseSessionLog(text);
    const header = records.find((record) => record.type === "session");
    const patientId = controls.patientId.value.trim();
    const mode = (header?.["mode"] as "basic" | "advanced") ?? "basic";
    const config =
        mode === "basic"
            ? { exercise_ids: header?.["exercise_ids"] as string[] }
            : {
                  duration_ms: header?.["duration_ms"] as number,
                  difficulty: header?.["difficulty"] as string,
                  timeline_seed: header?.["timeline_seed"] as number,
              };
    descriptor = await api.createSession(patientId, mode, config);
    view = initialViewState(descriptor);
    repaint();
    const sid = descriptor.session_id;
    const replay = new ReplayDriver(
        records,
        {
            startBaseline: () => api.startBaseline(sid),
            postFrame: (frame) => {
                if (view) {
                    view = applyFrameSent(view, frame);
                }
                return api.postFrame(sid, frame);
            },
            advance: (action, exerciseId) => api.advance(sid, action, exerciseId),
        },
        absorb,
        60, // 60x real time
    );
    await replay.run();
    const report = await api.completeSession(sid);
    if (view) {
        view = applyReport(view, report);
        repaint();
    }
}

async function loadDashboard(): Promise<void> {
    const patientId = controls.patientId.value.trim();
    try {
        const [aggregate, history] = await Promise.all([
            api.patientAggregate(patientId),
            api.patientReport(patientId),
        ]);
        let state = dashboardFromAggregate(aggregate, history.sessions);
        renderDashboard(dashboardRoot, state, (sessionId) => {
            state = selectSession(state, history.sessions, sessionId);
            renderDashboard(dashboardRoot, state, () => {});
        });
    } catch (error) {
        if (error instanceof ApiRequestError) {
            const state =
                error.code === "no_sessions"
                    ? dashboardEmptyState(patientId)
                    : dashboardError(error.code, error.detail);
            renderDashboard(dashboardRoot, state, () => {});
        } else {
            renderDashboard(dashboardRoot, dashboardError("network", String(error)), () => {});
        }
    }
}

async function main(): Promise<void> {
    await loadExercises();
    buildSliders();
    renderDashboard(dashboardRoot, emptyDashboard(), () => {});

    controls.createPatient.addEventListener("click", async () => {
        const created = await api.createPatient(controls.alias.value || "patient");
        controls.patientId.value = created.patient_id;
    });
    controls.startSession.addEventListener("click", () => void startSession());
    controls.beginBaseline.addEventListener("click", async () => {
        if (descriptor) {
            absorb(await api.startBaseline(descriptor.session_id));
        }
    });
    controls.continueBtn.addEventListener("click", async () => {
        if (!descriptor || !view) {
            return;
        }
        // from baseline capture, basic mode names its first exercise
        if (view.phase === "baseline_capture" && descriptor.mode === "basic") {
            absorb(await api.advance(descriptor.session_id, "start_exercise",
                                     descriptor.exercise_ids?.[0]));
        } else {
            absorb(await api.advance(descriptor.session_id, "continue"));
        }
    });
    controls.completeBtn.addEventListener("click", async () => {
        if (descriptor && view) {
            driver?.stop();
            view = applyReport(view, await api.completeSession(descriptor.session_id));
            repaint();
        }
    });
    controls.runReplay.addEventListener("click", () => void runReplay());
    controls.loadDashboard.addEventListener("click", () => void loadDashboard());
}

void main();
