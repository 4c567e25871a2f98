// DOM rendering for the two views. Pure view state goes in, elements come
// out; no scores are computed here.

import { LiveBar, PatientViewState } from "./patientView.js";
import { DashboardState } from "./physicianView.js";

const BANNER_COLORS: Record<string, string> = {
    green: "#1a7f37",
    amber: "#b58900",
    blue: "#0969da",
};

function el(tag: string, className: string, text = ""): HTMLElement {
    const node = document.createElement(tag);
    node.className = className;
    if (text) {
        node.textContent = text;
    }
    return node;
}

export function renderPatientView(
    root: HTMLElement,
    state: PatientViewState,
    bars: LiveBar[],
): void {
    root.replaceChildren();

    const banner = el("div", "banner");
    if (state.banner) {
        banner.textContent = state.banner.text;
        banner.style.background = BANNER_COLORS[state.banner.color] ?? "#444";
    } else {
        banner.textContent = state.phase.replace(/_/g, " ");
        banner.style.background = "#666";
    }
    root.appendChild(banner);

    if (state.notice) {
        root.appendChild(el("div", "notice", state.notice));
    }

    if (state.phase === "baseline_capture") {
        root.appendChild(
            el("p", "hint",
               `Hold a relaxed, neutral face… ${state.baselineFramesSeen}/${state.baselineFramesNeeded} frames`),
        );
    }

    if (state.instructionText && !state.sessionOver) {
        root.appendChild(el("p", "instruction", state.instructionText));
    }

    if (state.repsPlanned > 0 && !state.sessionOver) {
        const done = state.reps.length;
        root.appendChild(el("p", "progress", `Rep ${Math.min(state.currentRep, state.repsPlanned)} of ${state.repsPlanned} (${done} scored)`));
    }

    const barsBox = el("div", "bars");
    for (const bar of bars) {
        const row = el("div", "bar-row");
        row.appendChild(el("span", "bar-label", bar.au));
        const track = el("div", "bar-track");
        const baselineMark = el("div", "bar-baseline");
        baselineMark.style.left = `${bar.baseline * 100}%`;
        const targetMark = el("div", "bar-target");
        targetMark.style.left = `${Math.min(1, bar.baseline + bar.target) * 100}%`;
        const fill = el("div", "bar-fill");
        fill.style.width = `${bar.current * 100}%`;
        track.append(fill, baselineMark, targetMark);
        row.appendChild(track);
        root.appendChild(barsBox).appendChild(row);
    }

    if (state.segments.length > 0) {
        const lane = el("div", "timeline");
        for (const segment of state.segments) {
            const cell = el(
                "div",
                "segment" + (segment.active ? " active" : "") + (segment.score !== null ? " done" : ""),
            );
            cell.title = `${segment.exerciseId} (${segment.operaTrackId})`;
            cell.textContent =
                segment.score !== null ? (segment.score * 100).toFixed(0) : String(segment.index + 1);
            for (const _beat of segment.beatMs) {
                cell.appendChild(el("i", "beat"));
            }
            lane.appendChild(cell);
        }
        root.appendChild(lane);
    }

    if (state.finalScore !== null) {
        const final = el("div", "final-score", String(state.finalScore));
        final.id = "final-score";
        root.appendChild(final);
        root.appendChild(el("p", "hint", state.aborted ? "Session ended early." : "Session complete!"));
    }
}

export function renderDashboard(
    root: HTMLElement,
    state: DashboardState,
    onSelect: (sessionId: string) => void,
): void {
    root.replaceChildren();

    if (state.errorCode) {
        root.appendChild(el("div", "error", `${state.errorCode}: ${state.errorDetail ?? ""}`));
        return;
    }
    if (state.emptyMessage) {
        root.appendChild(el("p", "hint", state.emptyMessage));
        return;
    }

    const cards = el("div", "cards");
    for (const card of state.cards) {
        const box = el("div", "card");
        box.appendChild(el("h3", "card-title", card.region.replace(/_/g, " ")));
        const mean = el("div", "card-mean", card.meanLabel);
        mean.dataset.region = card.region;
        box.appendChild(mean);
        box.appendChild(el("div", `card-trend ${card.trendLabel}`, `${card.trendLabel} (${card.trend.toFixed(3)}/session)`));
        box.appendChild(el("div", "card-count", `${card.sessionCount} session(s)`));
        cards.appendChild(box);
    }
    root.appendChild(cards);

    const table = el("table", "sessions");
    const head = el("tr", "");
    for (const column of ["Started", "Mode", "Score", "Completed"]) {
        head.appendChild(el("th", "", column));
    }
    table.appendChild(head);
    for (const row of state.sessions) {
        const tr = el("tr", "session-row");
        tr.dataset.sessionId = row.sessionId;
        tr.appendChild(el("td", "", row.startedAt));
        tr.appendChild(el("td", "", row.mode));
        tr.appendChild(el("td", "", String(row.overallScore)));
        tr.appendChild(el("td", "", row.completed ? "yes" : "aborted"));
        tr.addEventListener("click", () => onSelect(row.sessionId));
        table.appendChild(tr);
    }
    root.appendChild(table);

    if (state.selected) {
        const detail = el("pre", "report-detail");
        detail.textContent = JSON.stringify(state.selected, null, 2);
        root.appendChild(detail);
    }
}
