"""Exception types shared across the package.

Parse errors carry 1-based line numbers so operators can fix the offending
record; engine and store errors carry the identifiers the service layer
needs to map them onto HTTP error codes.
"""

from __future__ import annotations


class HypomimiaCoachError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------- frames


class FrameStreamError(HypomimiaCoachError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedLine(FrameStreamError):
    def __init__(self, line_no: int, detail: str = "malformed AU frame record"):
        super().__init__(line_no, detail)


class IntensityOutOfRange(FrameStreamError):
    def __init__(self, line_no: int, au_code: str, value: float):
        super().__init__(line_no, f"intensity {value!r} for {au_code} outside [0, 1]")
        self.au_code = au_code
        self.value = value


class NonMonotoneTimestamp(FrameStreamError):
    def __init__(self, line_no: int, t_ms: int, prev_t_ms: int):
        super().__init__(line_no, f"t_ms {t_ms} does not increase past {prev_t_ms}")
        self.t_ms = t_ms
        self.prev_t_ms = prev_t_ms


class InconsistentAUSet(FrameStreamError):
    def __init__(self, line_no: int, expected: tuple[str, ...], got: tuple[str, ...]):
        super().__init__(line_no, f"AU set {sorted(got)} differs from first frame {sorted(expected)}")
        self.expected = expected
        self.got = got


# ----------------------------------------------------------------- model


class ModelFormatError(HypomimiaCoachError):
    """Weights file has the wrong magic, a dimension mismatch, or a bad tensor."""


class NonFiniteStage(HypomimiaCoachError):
    def __init__(self, stage: str):
        super().__init__(f"non-finite values produced at stage '{stage}'")
        self.stage = stage


class TrainingDiverged(HypomimiaCoachError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


# ---------------------------------------------------------------- engine


class CatalogError(HypomimiaCoachError):
    """Exercise catalog file is malformed or references unknown AU codes."""


class IllegalEvent(HypomimiaCoachError):
    def __init__(self, phase: str, event: str, detail: str = ""):
        msg = f"event {event} is not legal in phase {phase}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.phase = phase
        self.event = event


class NonMonotoneFrame(HypomimiaCoachError):
    def __init__(self, t_ms: int, last_t_ms: int):
        super().__init__(f"frame t_ms {t_ms} does not increase past {last_t_ms}")
        self.t_ms = t_ms
        self.last_t_ms = last_t_ms


class MissingAU(HypomimiaCoachError):
    def __init__(self, au_code: str, where: str):
        super().__init__(f"{where} is missing {au_code}")
        self.au_code = au_code


# ----------------------------------------------------------------- store


class DuplicateSession(HypomimiaCoachError):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id} already stored")
        self.session_id = session_id


class UnknownPatient(HypomimiaCoachError):
    def __init__(self, patient_id: str):
        super().__init__(f"unknown patient {patient_id}")
        self.patient_id = patient_id


class NoSessions(HypomimiaCoachError):
    def __init__(self, patient_id: str):
        super().__init__(f"patient {patient_id} has no stored sessions")
        self.patient_id = patient_id


class UnknownSession(HypomimiaCoachError):
    def __init__(self, session_id: str):
        super().__init__(f"unknown session {session_id}")
        self.session_id = session_id
