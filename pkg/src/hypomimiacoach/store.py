"""File-backed patient store and the physician-facing aggregation.

Layout: data/patients/<id>/index.json plus sessions/<session_id>.json, one
JSON document per report, written atomically (temp file + rename). Writers
serialize through an advisory lock on the index file; HC_DATA_DIR overrides
the root. Patient identifiers are opaque aliases; nothing identifying is
stored.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock

from .errors import DuplicateSession, NoSessions, UnknownPatient, UnknownSession
from .session import SessionReport, canonical_report_json, report_from_dict

# separated out so crash tests can fail the rename step
_rename = os.replace


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    _rename(tmp, path)


@dataclass(frozen=True)
class RegionAggregate:
    facial_region: str
    session_count: int
    mean_achievement: float
    trend: float  # least-squares slope of session region mean vs ordinal

    def to_dict(self) -> dict:
        return {
            "facial_region": self.facial_region,
            "session_count": self.session_count,
            "mean_achievement": self.mean_achievement,
            "trend": self.trend,
        }


def _slope(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean_x = (n - 1) / 2.0
    mean_y = sum(values) / n
    num = sum((i - mean_x) * (y - mean_y) for i, y in enumerate(values))
    den = sum((i - mean_x) ** 2 for i in range(n))
    return num / den


class PatientStore:
    def __init__(self, root: Path | str | None = None):
        if root is None:
            root = os.environ.get("HC_DATA_DIR", "data")
        self.root = Path(root)
        self.patients_dir = self.root / "patients"
        self.patients_dir.mkdir(parents=True, exist_ok=True)

    # ----------------------------------------------------------- patients

    def _patient_dir(self, patient_id: str) -> Path:
        return self.patients_dir / patient_id

    def _index_path(self, patient_id: str) -> Path:
        return self._patient_dir(patient_id) / "index.json"

    def _index_lock(self, patient_id: str) -> FileLock:
        return FileLock(str(self._index_path(patient_id)) + ".lock")

    def patient_exists(self, patient_id: str) -> bool:
        return self._index_path(patient_id).exists()

    def create_patient(self, alias: str, patient_id: str | None = None) -> str:
        patient_id = patient_id or uuid.uuid4().hex[:12]
        pdir = self._patient_dir(patient_id)
        if self._index_path(patient_id).exists():
            raise ValueError(f"patient {patient_id} already exists")
        (pdir / "sessions").mkdir(parents=True, exist_ok=True)
        index = {"patient_id": patient_id, "alias": alias, "created_at": _utc_now(), "sessions": []}
        _atomic_write(self._index_path(patient_id), json.dumps(index, indent=2).encode())
        return patient_id

    def _read_index(self, patient_id: str) -> dict:
        path = self._index_path(patient_id)
        if not path.exists():
            raise UnknownPatient(patient_id)
        return json.loads(path.read_text())

    def list_patients(self) -> list[dict]:
        out = []
        for pdir in sorted(self.patients_dir.iterdir()):
            if (pdir / "index.json").exists():
                index = json.loads((pdir / "index.json").read_text())
                out.append({k: index[k] for k in ("patient_id", "alias", "created_at")})
        return out

    # ----------------------------------------------------------- sessions

    def _session_path(self, patient_id: str, session_id: str) -> Path:
        return self._patient_dir(patient_id) / "sessions" / f"{session_id}.json"

    def store_session(self, report: SessionReport) -> str:
        """Atomically persist a report; the index entry is the commit point,
        so an interrupted write leaves the old state visible and retryable."""
        patient_id = report.patient_id
        with self._index_lock(patient_id):
            index = self._read_index(patient_id)
            if report.session_id in index["sessions"]:
                raise DuplicateSession(report.session_id)
            _atomic_write(self._session_path(patient_id, report.session_id), canonical_report_json(report))
            index["sessions"].append(report.session_id)
            _atomic_write(self._index_path(patient_id), json.dumps(index, indent=2).encode())
        return report.session_id

    def load_session(self, patient_id: str, session_id: str) -> SessionReport:
        path = self._session_path(patient_id, session_id)
        if not self.patient_exists(patient_id):
            raise UnknownPatient(patient_id)
        if not path.exists():
            raise UnknownSession(session_id)
        return report_from_dict(json.loads(path.read_text()))

    def find_session(self, session_id: str) -> SessionReport | None:
        """Scan all patients for a committed session id (used for idempotent
        service completion after an eviction)."""
        for entry in self.list_patients():
            index = self._read_index(entry["patient_id"])
            if session_id in index["sessions"]:
                return self.load_session(entry["patient_id"], session_id)
        return None

    def patient_history(self, patient_id: str) -> list[SessionReport]:
        index = self._read_index(patient_id)
        reports = [self.load_session(patient_id, sid) for sid in index["sessions"]]
        return sorted(reports, key=lambda r: (r.started_at, r.session_id))

    def purge_session(self, patient_id: str, session_id: str, reason: str) -> None:
        """The only deletion path; writes an audit entry alongside."""
        with self._index_lock(patient_id):
            index = self._read_index(patient_id)
            if session_id not in index["sessions"]:
                raise UnknownSession(session_id)
            index["sessions"] = [sid for sid in index["sessions"] if sid != session_id]
            path = self._session_path(patient_id, session_id)
            if path.exists():
                path.unlink()
            _atomic_write(self._index_path(patient_id), json.dumps(index, indent=2).encode())
            audit = {"at": _utc_now(), "action": "purge", "session_id": session_id, "reason": reason}
            with open(self._patient_dir(patient_id) / "audit.jsonl", "a") as fh:
                fh.write(json.dumps(audit, sort_keys=True) + "\n")

    # -------------------------------------------------------- aggregation

    def physician_aggregate(self, patient_id: str) -> dict[str, RegionAggregate]:
        """Per-region mean of session-level region means plus the trend
        (least-squares slope over session ordinals; 0 for a single session)."""
        history = self.patient_history(patient_id)
        if not history:
            raise NoSessions(patient_id)
        per_region: dict[str, list[float]] = {}
        for report in history:
            for region, mean in report.region_means.items():
                per_region.setdefault(region, []).append(mean)
        return {
            region: RegionAggregate(
                facial_region=region,
                session_count=len(values),
                mean_achievement=sum(values) / len(values),
                trend=_slope(values),
            )
            for region, values in sorted(per_region.items())
        }
