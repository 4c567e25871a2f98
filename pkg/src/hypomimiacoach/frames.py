"""AU frame records: the line-delimited input format every stage consumes.

One record per line, UTF-8: ``{"t_ms": <int>, "au": {"<AUcode>": <float>, ...}}``.
A stream is valid when timestamps strictly increase, every intensity lies in
[0, 1], and all frames carry the same AU code set as the first frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Union

from .errors import (
    InconsistentAUSet,
    IntensityOutOfRange,
    MalformedLine,
    NonMonotoneTimestamp,
)

# Canonical AU vocabulary: the eight detection AUs plus every code the
# exercise catalog references. Table-2 codes (AU44, AU33, AU19, ...) are
# opaque identifiers, not validated FACS numbers.
CANONICAL_AUS: tuple[str, ...] = (
    "AU1", "AU2", "AU4", "AU5", "AU6", "AU9", "AU12", "AU13", "AU18",
    "AU19", "AU24", "AU25", "AU26", "AU27", "AU28", "AU33", "AU44",
)


@dataclass(frozen=True)
class AUFrame:
    """One timestamped vector of AU activation intensities."""

    t_ms: int
    intensities: dict[str, float]

    def __post_init__(self):
        if not isinstance(self.t_ms, int) or isinstance(self.t_ms, bool) or self.t_ms < 0:
            raise ValueError(f"t_ms must be a non-negative integer, got {self.t_ms!r}")
        if not self.intensities:
            raise ValueError("frame carries no AU intensities")
        for au, value in self.intensities.items():
            if not isinstance(value, float) or not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise ValueError(f"intensity {value!r} for {au} outside [0, 1]")

    def au_set(self) -> frozenset[str]:
        return frozenset(self.intensities)


StreamSource = Union[IO[bytes], Iterable[bytes], bytes]


def _iter_lines(source: StreamSource) -> Iterable[bytes]:
    if isinstance(source, bytes):
        return source.splitlines()
    return source


def frame_to_record(frame: AUFrame) -> dict:
    return {"t_ms": frame.t_ms, "au": dict(frame.intensities)}


def record_to_frame(record: dict, line_no: int = 0) -> AUFrame:
    """Build a validated AUFrame from a parsed record dict."""
    if not isinstance(record, dict) or set(record) != {"t_ms", "au"}:
        raise MalformedLine(line_no, "record must be an object with exactly 't_ms' and 'au'")
    t_ms = record["t_ms"]
    au = record["au"]
    if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
        raise MalformedLine(line_no, f"t_ms must be a non-negative integer, got {t_ms!r}")
    if not isinstance(au, dict) or not au:
        raise MalformedLine(line_no, "'au' must be a non-empty object")
    intensities: dict[str, float] = {}
    for code, value in au.items():
        if not isinstance(code, str) or not code:
            raise MalformedLine(line_no, f"bad AU code {code!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedLine(line_no, f"intensity for {code} is not a number")
        value = float(value)
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise IntensityOutOfRange(line_no, code, value)
        intensities[code] = value
    return AUFrame(t_ms=t_ms, intensities=intensities)


def parse_au_frame_stream(source: StreamSource) -> list[AUFrame]:
    """Parse a byte stream of line-delimited AU frame records.

    Returns frames in file order. Raises the first violation found:
    MalformedLine, IntensityOutOfRange, NonMonotoneTimestamp, or
    InconsistentAUSet, each carrying the 1-based line number.
    Blank lines are skipped but still counted.
    """
    frames: list[AUFrame] = []
    au_set: frozenset[str] | None = None
    last_t: int | None = None
    line_no = 0
    for raw in _iter_lines(source):
        line_no += 1
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc}") from exc
        frame = record_to_frame(record, line_no)
        if last_t is not None and frame.t_ms <= last_t:
            raise NonMonotoneTimestamp(line_no, frame.t_ms, last_t)
        if au_set is None:
            au_set = frame.au_set()
        elif frame.au_set() != au_set:
            raise InconsistentAUSet(line_no, tuple(sorted(au_set)), tuple(sorted(frame.au_set())))
        last_t = frame.t_ms
        frames.append(frame)
    return frames


def serialize_au_frames(frames: Iterable[AUFrame]) -> bytes:
    """Inverse of parse_au_frame_stream: one JSON record per line."""
    lines = [
        json.dumps(frame_to_record(f), separators=(",", ":"), sort_keys=False)
        for f in frames
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
