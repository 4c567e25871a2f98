"""Exercise catalog: facial regions, target AUs, and rep/hold parameters.

The bundled catalog covers the four facial regions (eyebrow, nose-and-eye,
lip, articulation). AU codes are opaque catalog identifiers validated only
against the frame schema's canonical AU set.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import CatalogError
from .frames import CANONICAL_AUS


class FacialRegion(enum.Enum):
    EYEBROW = "eyebrow"
    NOSE_AND_EYE = "nose_and_eye"
    LIP = "lip"
    ARTICULATION = "articulation"


REGION_CYCLE = (
    FacialRegion.EYEBROW,
    FacialRegion.NOSE_AND_EYE,
    FacialRegion.LIP,
    FacialRegion.ARTICULATION,
)


@dataclass(frozen=True)
class ExerciseSpec:
    id: str
    facial_region: FacialRegion
    target_aus: dict[str, float]
    reps: int = 3
    hold_ms: int = 500
    timeout_ms: int = 15000
    instruction_text: str = ""
    instruction_media: str = ""

    def __post_init__(self):
        if not self.id:
            raise CatalogError("exercise id must be nonempty")
        if not self.target_aus:
            raise CatalogError(f"{self.id}: target_aus must be nonempty")
        for au, amplitude in self.target_aus.items():
            if not 0.0 < amplitude <= 1.0:
                raise CatalogError(f"{self.id}: target amplitude for {au} must lie in (0, 1]")
        if self.reps < 1:
            raise CatalogError(f"{self.id}: reps must be >= 1")
        if not 0 < self.hold_ms < self.timeout_ms:
            raise CatalogError(f"{self.id}: need 0 < hold_ms < timeout_ms")


@dataclass(frozen=True)
class ExerciseCatalog:
    exercises: tuple[ExerciseSpec, ...]
    by_id: dict[str, ExerciseSpec] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "by_id", {e.id: e for e in self.exercises})

    def by_region(self, region: FacialRegion) -> list[ExerciseSpec]:
        return [e for e in self.exercises if e.facial_region is region]

    def get(self, exercise_id: str) -> ExerciseSpec:
        if exercise_id not in self.by_id:
            raise CatalogError(f"unknown exercise id {exercise_id!r}")
        return self.by_id[exercise_id]


def _parse_catalog(payload: dict, source: str) -> ExerciseCatalog:
    if not isinstance(payload, dict) or "exercises" not in payload:
        raise CatalogError(f"{source}: catalog must be an object with an 'exercises' list")
    specs = []
    seen: set[str] = set()
    for entry in payload["exercises"]:
        try:
            spec = ExerciseSpec(
                id=entry["id"],
                facial_region=FacialRegion(entry["facial_region"]),
                target_aus={str(k): float(v) for k, v in entry["target_aus"].items()},
                reps=int(entry.get("reps", 3)),
                hold_ms=int(entry.get("hold_ms", 500)),
                timeout_ms=int(entry.get("timeout_ms", 15000)),
                instruction_text=str(entry.get("instruction_text", "")),
                instruction_media=str(entry.get("instruction_media", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"{source}: bad exercise entry: {exc}") from exc
        if spec.id in seen:
            raise CatalogError(f"{source}: duplicate exercise id {spec.id!r}")
        seen.add(spec.id)
        unknown = set(spec.target_aus) - set(CANONICAL_AUS)
        if unknown:
            raise CatalogError(f"{source}: {spec.id} targets AUs outside the frame schema: {sorted(unknown)}")
        specs.append(spec)
    if not specs:
        raise CatalogError(f"{source}: catalog is empty")
    return ExerciseCatalog(tuple(specs))


def load_exercise_catalog(path: Path | None = None) -> ExerciseCatalog:
    """Load the bundled catalog, or a user-supplied JSON file."""
    if path is None:
        text = resources.files("hypomimiacoach.data").joinpath("exercises.json").read_text()
        source = "bundled catalog"
    else:
        text = Path(path).read_text()
        source = str(path)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{source}: invalid JSON: {exc}") from exc
    return _parse_catalog(payload, source)
