"""HTTP/JSON session service tying together ingestion, the rehab engine,
detection, and persistence.

Endpoint handlers never touch engine internals except through
advance_session / finalize_session; per-session events are serialized by a
per-session lock, so concurrent sessions stay isolated. Errors use the
envelope {"error": {"code": ..., "detail": ...}}.
"""

from __future__ import annotations

import hashlib
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .cohort import Label, embed_frames
from .errors import (
    DuplicateSession,
    FrameStreamError,
    HypomimiaCoachError,
    IllegalEvent,
    MissingAU,
    NoSessions,
    NonMonotoneFrame,
    UnknownPatient,
    UnknownSession,
)
from .exercises import ExerciseCatalog, load_exercise_catalog
from .frames import record_to_frame
from .model import DetectionModel, classify_subject, load_model
from .session import (
    Abort,
    AdvancedTimeline,
    BaselineFrame,
    Difficulty,
    FeedbackEvent,
    Frame,
    InstructionDone,
    Mode,
    Phase,
    SessionEvent,
    SessionReport,
    SessionState,
    Skip,
    StartBaseline,
    StartExercise,
    TERMINAL_PHASES,
    advance_session,
    build_advanced_timeline,
    event_to_record,
    finalize_session,
    new_advanced_session,
    new_basic_session,
    session_header_record,
)
from .store import PatientStore

DEFAULT_IDLE_TIMEOUT_S = 300.0


class BadConfig(HypomimiaCoachError):
    pass


class AuthError(HypomimiaCoachError):
    pass


_ERROR_MAP: list[tuple[type, int, str]] = [
    (AuthError, 401, "unauthorized"),
    (UnknownPatient, 404, "unknown_patient"),
    (UnknownSession, 404, "unknown_session"),
    (NoSessions, 404, "no_sessions"),
    (DuplicateSession, 409, "duplicate_session"),
    (IllegalEvent, 409, "illegal_phase"),
    (NonMonotoneFrame, 409, "non_monotone_frame"),
    (MissingAU, 409, "missing_au"),
    (FrameStreamError, 400, "malformed"),
    (BadConfig, 400, "bad_config"),
]


def _error_response(exc: Exception) -> JSONResponse:
    for etype, status, code in _ERROR_MAP:
        if isinstance(exc, etype):
            return JSONResponse(
                status_code=status, content={"error": {"code": code, "detail": str(exc)}}
            )
    return JSONResponse(
        status_code=400, content={"error": {"code": "bad_request", "detail": str(exc)}}
    )


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


@dataclass
class ApiSession:
    session_id: str
    patient_id: str
    state: SessionState
    timeline: AdvancedTimeline | None
    log_records: list[dict]
    events: list[FeedbackEvent] = field(default_factory=list)
    last_event_at: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    """Live sessions plus an idempotence cache of completed reports."""

    def __init__(self, store: PatientStore, idle_timeout_s: float):
        self.store = store
        self.idle_timeout_s = idle_timeout_s
        self._live: dict[str, ApiSession] = {}
        self._completed: dict[str, SessionReport] = {}
        self._lock = threading.Lock()

    def add(self, session: ApiSession) -> None:
        with self._lock:
            self._live[session.session_id] = session

    def get_live(self, session_id: str) -> ApiSession:
        with self._lock:
            session = self._live.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def expire_idle(self) -> None:
        """Finalize sessions idle past the timeout as aborted."""
        now = time.monotonic()
        with self._lock:
            stale = [s for s in self._live.values() if now - s.last_event_at > self.idle_timeout_s]
        for session in stale:
            try:
                self.complete(session.session_id)
            except HypomimiaCoachError:  # pragma: no cover - already completed elsewhere
                pass

    def complete(self, session_id: str) -> SessionReport:
        with self._lock:
            session = self._live.get(session_id)
            if session is None:
                cached = self._completed.get(session_id)
                if cached is not None:
                    return cached
                stored = self.store.find_session(session_id)
                if stored is not None:
                    return stored
                raise UnknownSession(session_id)
        with session.lock:
            state = session.state
            if state.phase not in TERMINAL_PHASES:
                state, events = advance_session(state, Abort())
                session.log_records.append(event_to_record(Abort()))
                session.events.extend(events)
                session.state = state
            report = finalize_session(state)
        self.store.store_session(report)
        with self._lock:
            self._completed[session_id] = report
            self._live.pop(session_id, None)
        return report

    def apply(self, session_id: str, event: SessionEvent) -> tuple[ApiSession, list[FeedbackEvent]]:
        session = self.get_live(session_id)
        with session.lock:
            new_state, events = advance_session(session.state, event)
            session.state = new_state
            session.log_records.append(event_to_record(event))
            session.events.extend(events)
            session.last_event_at = time.monotonic()
        return session, events


# ------------------------------------------------------------ request bodies


class PatientBody(BaseModel):
    alias: str


class SessionConfigBody(BaseModel):
    exercise_ids: list[str] | None = None
    duration_ms: int | None = None
    difficulty: str | None = None
    timeline_seed: int | None = None
    min_baseline_frames: int | None = None


class CreateSessionBody(BaseModel):
    patient_id: str
    mode: str
    config: SessionConfigBody = SessionConfigBody()


class AdvanceBody(BaseModel):
    action: str
    exercise_id: str | None = None


class DetectBody(BaseModel):
    frames: list[dict] | None = None
    features: list[list[float]] | None = None


def _events_payload(events: list[FeedbackEvent], phase: Phase) -> dict:
    return {"events": [e.to_record() for e in events], "phase": phase.value}


def create_app(
    store: PatientStore | None = None,
    model: DetectionModel | str | Path | None = None,
    catalog: ExerciseCatalog | None = None,
    api_token: str | None = None,
    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
) -> FastAPI:
    store = store or PatientStore()
    catalog = catalog or load_exercise_catalog()
    model_version = None
    if isinstance(model, (str, Path)):
        digest = hashlib.sha256(Path(model).read_bytes()).hexdigest()[:12]
        model = load_model(model)
        model_version = digest
    elif isinstance(model, DetectionModel):
        model_version = "in-memory"

    app = FastAPI(title="hypomimiacoach", docs_url=None, redoc_url=None)
    registry = SessionRegistry(store, idle_timeout_s)
    app.state.store = store
    app.state.registry = registry
    app.state.catalog = catalog
    app.state.model = model
    app.state.model_version = model_version

    @app.exception_handler(HypomimiaCoachError)
    async def _coach_error(_request: Request, exc: HypomimiaCoachError):
        return _error_response(exc)

    def require_token(x_api_token: str | None = Header(default=None)):
        if api_token is not None and x_api_token != api_token:
            raise AuthError("missing or invalid API token")

    auth = [Depends(require_token)]

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": {"code": "bad_config", "detail": str(exc)}})

    # --------------------------------------------------------- patients

    @app.post("/patients", status_code=201, dependencies=auth)
    def create_patient(body: PatientBody):
        patient_id = store.create_patient(body.alias)
        return {"patient_id": patient_id, "alias": body.alias}

    @app.get("/exercises", dependencies=auth)
    def list_exercises():
        return {
            "exercises": [
                {
                    "id": e.id,
                    "facial_region": e.facial_region.value,
                    "target_aus": e.target_aus,
                    "reps": e.reps,
                    "hold_ms": e.hold_ms,
                    "timeout_ms": e.timeout_ms,
                    "instruction_text": e.instruction_text,
                    "instruction_media": e.instruction_media,
                }
                for e in catalog.exercises
            ]
        }

    # --------------------------------------------------------- sessions

    @app.post("/sessions", status_code=201, dependencies=auth)
    def create_session(body: CreateSessionBody):
        registry.expire_idle()
        if not store.patient_exists(body.patient_id):
            raise UnknownPatient(body.patient_id)
        session_id = uuid.uuid4().hex[:12]
        started_at = _utc_now()
        cfg = body.config
        baseline_n = cfg.min_baseline_frames or 10
        timeline = None
        if body.mode == Mode.BASIC.value:
            if not cfg.exercise_ids:
                raise BadConfig("basic mode needs config.exercise_ids")
            unknown = [eid for eid in cfg.exercise_ids if eid not in catalog.by_id]
            if unknown:
                raise BadConfig(f"unknown exercise ids {unknown}")
            state = new_basic_session(
                session_id, body.patient_id, [catalog.get(eid) for eid in cfg.exercise_ids],
                started_at, baseline_n,
            )
        elif body.mode == Mode.ADVANCED.value:
            if cfg.duration_ms is None:
                raise BadConfig("advanced mode needs config.duration_ms")
            try:
                difficulty = Difficulty(cfg.difficulty or Difficulty.EASY.value)
            except ValueError:
                raise BadConfig(f"unknown difficulty {cfg.difficulty!r}") from None
            seed = cfg.timeline_seed if cfg.timeline_seed is not None else uuid.uuid4().int % (2**31)
            try:
                timeline = build_advanced_timeline(catalog, cfg.duration_ms, difficulty, seed)
            except ValueError as exc:
                raise BadConfig(str(exc)) from None
            state = new_advanced_session(
                session_id, body.patient_id, timeline, catalog, started_at, baseline_n
            )
        else:
            raise BadConfig(f"unknown mode {body.mode!r}")

        session = ApiSession(
            session_id=session_id,
            patient_id=body.patient_id,
            state=state,
            timeline=timeline,
            log_records=[session_header_record(state)],
        )
        registry.add(session)
        descriptor: dict[str, Any] = {
            "session_id": session_id,
            "patient_id": body.patient_id,
            "mode": body.mode,
            "phase": state.phase.value,
            "started_at": started_at,
            "min_baseline_frames": baseline_n,
        }
        if body.mode == Mode.BASIC.value:
            descriptor["exercise_ids"] = list(cfg.exercise_ids)
        else:
            descriptor["timeline"] = timeline.to_record()
        return descriptor

    @app.post("/sessions/{session_id}/baseline/start", dependencies=auth)
    def baseline_start(session_id: str):
        session, events = registry.apply(session_id, StartBaseline())
        return _events_payload(events, session.state.phase)

    @app.post("/sessions/{session_id}/frames", dependencies=auth)
    def ingest_frame(session_id: str, body: dict):
        """Applies the frame through the engine: a baseline frame during
        capture, a scoring frame during exercising/segments. Frames in any
        other phase are an illegal_phase error."""
        frame = record_to_frame(body, 0)
        session = registry.get_live(session_id)
        phase = session.state.phase
        event: SessionEvent = BaselineFrame(frame) if phase is Phase.BASELINE_CAPTURE else Frame(frame)
        session, events = registry.apply(session_id, event)
        return _events_payload(events, session.state.phase)

    @app.post("/sessions/{session_id}/advance", dependencies=auth)
    def advance(session_id: str, body: AdvanceBody):
        if body.action == "start_exercise":
            if body.exercise_id is None:
                raise BadConfig("start_exercise needs exercise_id")
            event: SessionEvent = StartExercise(body.exercise_id)
        elif body.action == "continue":
            event = InstructionDone()
        elif body.action == "skip":
            event = Skip()
        elif body.action == "abort":
            event = Abort()
        else:
            raise BadConfig(f"unknown action {body.action!r}")
        session, events = registry.apply(session_id, event)
        return _events_payload(events, session.state.phase)

    @app.get("/sessions/{session_id}/events", dependencies=auth)
    def poll_events(session_id: str, since: int = 0):
        session = registry.get_live(session_id)
        with session.lock:
            events = [e for e in session.events if e.seq > since]
            phase = session.state.phase
        return _events_payload(events, phase)

    @app.post("/sessions/{session_id}/complete", dependencies=auth)
    def complete(session_id: str):
        report = registry.complete(session_id)
        return report.to_dict()

    @app.get("/sessions/{session_id}/log", dependencies=auth)
    def session_log(session_id: str):
        """Replayable JSONL records for a live session (debug/export)."""
        session = registry.get_live(session_id)
        with session.lock:
            return {"records": list(session.log_records)}

    # ---------------------------------------------------------- reports

    @app.get("/patients/{patient_id}/report", dependencies=auth)
    def patient_report(patient_id: str):
        history = store.patient_history(patient_id)
        return {"patient_id": patient_id, "sessions": [r.to_dict() for r in history]}

    @app.get("/patients/{patient_id}/aggregate", dependencies=auth)
    def patient_aggregate(patient_id: str):
        aggregate = store.physician_aggregate(patient_id)
        return {
            "patient_id": patient_id,
            "regions": {region: agg.to_dict() for region, agg in aggregate.items()},
        }

    # ----------------------------------------------------------- detect

    @app.post("/detect", dependencies=auth)
    def detect(body: DetectBody):
        if model is None:
            return JSONResponse(
                status_code=503,
                content={"error": {"code": "no_model", "detail": "no detection model loaded"}},
            )
        if body.features is not None:
            X = np.asarray(body.features, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] != model.config.feature_dim:
                raise BadConfig(
                    f"features must be a non-empty matrix with {model.config.feature_dim} columns"
                )
        elif body.frames:
            frames = [record_to_frame(r, i + 1) for i, r in enumerate(body.frames)]
            X = embed_frames(frames, model.config.feature_dim)
        else:
            raise BadConfig("upload must carry 'frames' or 'features'")
        label, probability = classify_subject(model, X)
        return {
            "label": label.value,
            "probability": probability,
            "model_version": app.state.model_version,
        }

    return app
