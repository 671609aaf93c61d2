"""Line-delimited record formats and comma-separated report tables.

Trajectory and rating streams are JSON lines with a fixed key order. Parsing
is strict: unknown keys, missing keys, wrong types and out-of-range values
raise RecordError naming the offending line.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import IO, Any, Iterable, Iterator, Optional, Sequence

from .estimation import normalize_likert
from .safety import TrajectorySample, ValidationError

ROLES = ("BYS", "CAS")
MODES = ("AS", "AF", "TO")

TRAJECTORY_FIELDS = ("participant_id", "role", "mode", "trial", "t", "d", "v", "bearing")
RATING_FIELDS = ("participant_id", "role", "mode", "trial", "item", "value", "scale_points", "rating")


class RecordError(ValidationError):
    """Malformed input record; the message starts with the line number."""


class SegmentError(ValidationError):
    """Trajectory segment is split or its timestamps go backwards."""


def fmt(x: Any) -> str:
    """Render a value for output: floats with 6 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".6g")
    return str(x)


def _json_value(x: Any) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "null"
    if isinstance(x, (bool, int, float)):
        return fmt(x)
    return json.dumps(x)


def dumps_record(rec: dict) -> str:
    return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(v)}" for k, v in rec.items()) + "}"


@dataclass(frozen=True)
class TrajectoryRecord:
    participant_id: str
    role: str
    mode: str
    trial: int
    t: float
    d: float
    v: float
    bearing: Optional[float] = None

    @property
    def segment(self) -> tuple[str, str, int]:
        return (self.participant_id, self.mode, self.trial)

    def sample(self) -> TrajectorySample:
        return TrajectorySample(self.t, self.d, self.v, self.bearing)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in TRAJECTORY_FIELDS}


@dataclass(frozen=True)
class RatingRecord:
    participant_id: str
    role: str
    mode: str
    trial: int
    item: str
    value: Optional[int] = None
    scale_points: Optional[int] = None
    rating: Optional[float] = None

    @property
    def segment(self) -> tuple[str, str, int]:
        return (self.participant_id, self.mode, self.trial)

    @property
    def normalized(self) -> float:
        if self.value is not None:
            return normalize_likert(self.value, self.scale_points)
        return float(self.rating)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in RATING_FIELDS}


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _load(line: str, lineno: int, fields: Sequence[str], required: Sequence[str]) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise RecordError(f"line {lineno}: expected a JSON object")
    unknown = sorted(set(obj) - set(fields))
    if unknown:
        raise RecordError(f"line {lineno}: unknown field(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise RecordError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    return obj


def _check_keys(obj: dict, lineno: int) -> None:
    if not isinstance(obj["participant_id"], str) or not obj["participant_id"]:
        raise RecordError(f"line {lineno}: participant_id must be a non-empty string")
    if obj["role"] not in ROLES:
        raise RecordError(f"line {lineno}: role must be one of {ROLES}, got {obj['role']!r}")
    if obj["mode"] not in MODES:
        raise RecordError(f"line {lineno}: mode must be one of {MODES}, got {obj['mode']!r}")
    if not _is_int(obj["trial"]) or obj["trial"] not in (1, 2):
        raise RecordError(f"line {lineno}: trial must be 1 or 2, got {obj['trial']!r}")


def parse_trajectory_line(line: str, lineno: int) -> TrajectoryRecord:
    obj = _load(line, lineno, TRAJECTORY_FIELDS, TRAJECTORY_FIELDS[:-1])
    _check_keys(obj, lineno)
    for k in ("t", "d", "v"):
        if not _is_number(obj[k]):
            raise RecordError(f"line {lineno}: {k} must be a finite number, got {obj[k]!r}")
    if obj["d"] < 0:
        raise RecordError(f"line {lineno}: d must be >= 0, got {obj['d']}")
    bearing = obj.get("bearing")
    if bearing is not None and not _is_number(bearing):
        raise RecordError(f"line {lineno}: bearing must be a finite number or null")
    return TrajectoryRecord(obj["participant_id"], obj["role"], obj["mode"], obj["trial"],
                            float(obj["t"]), float(obj["d"]), float(obj["v"]),
                            None if bearing is None else float(bearing))


def parse_rating_line(line: str, lineno: int) -> RatingRecord:
    obj = _load(line, lineno, RATING_FIELDS, RATING_FIELDS[:5])
    _check_keys(obj, lineno)
    if not isinstance(obj["item"], str) or not obj["item"]:
        raise RecordError(f"line {lineno}: item must be a non-empty string")
    value, scale, rating = obj.get("value"), obj.get("scale_points"), obj.get("rating")
    if value is not None or scale is not None:
        if rating is not None:
            raise RecordError(f"line {lineno}: give either value/scale_points or rating, not both")
        if scale not in (5, 7) or not _is_int(scale):
            raise RecordError(f"line {lineno}: scale_points must be 5 or 7, got {scale!r}")
        if not _is_int(value) or not 1 <= value <= scale:
            raise RecordError(f"line {lineno}: value must be an integer in [1, {scale}], got {value!r}")
    elif rating is None:
        raise RecordError(f"line {lineno}: one of value/scale_points or rating is required")
    elif not _is_number(rating) or not 0 <= rating <= 1:
        raise RecordError(f"line {lineno}: rating must be a number in [0, 1], got {rating!r}")
    return RatingRecord(obj["participant_id"], obj["role"], obj["mode"], obj["trial"], obj["item"],
                        value, scale, None if rating is None else float(rating))


def _iter_lines(stream: Iterable[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(stream, start=1):
        if line.strip():
            yield lineno, line


class SegmentChecker:
    """Enforces contiguous, time-sorted (participant, mode, trial) segments."""

    def __init__(self) -> None:
        self.closed: set = set()
        self.current = None
        self.last_t = -math.inf

    def check(self, rec: TrajectoryRecord, lineno: int) -> None:
        key = rec.segment
        if key != self.current:
            if key in self.closed:
                raise SegmentError(f"line {lineno}: segment {key} is not contiguous")
            if self.current is not None:
                self.closed.add(self.current)
            self.current = key
            self.last_t = -math.inf
        if rec.t < self.last_t:
            raise SegmentError(f"line {lineno}: time goes backwards in segment {key} "
                               f"({rec.t} < {self.last_t})")
        self.last_t = rec.t


def iter_trajectories(stream: Iterable[str]) -> Iterator[tuple[int, TrajectoryRecord]]:
    checker = SegmentChecker()
    for lineno, line in _iter_lines(stream):
        rec = parse_trajectory_line(line, lineno)
        checker.check(rec, lineno)
        yield lineno, rec


def read_trajectories(stream: Iterable[str]) -> list[TrajectoryRecord]:
    return [rec for _, rec in iter_trajectories(stream)]


def read_ratings(stream: Iterable[str]) -> list[RatingRecord]:
    return [parse_rating_line(line, lineno) for lineno, line in _iter_lines(stream)]


def write_records(records: Iterable, out: IO[str]) -> int:
    n = 0
    for rec in records:
        out.write(dumps_record(rec.as_dict() if hasattr(rec, "as_dict") else rec) + "\n")
        n += 1
    return n


def write_table(rows: Sequence[dict], columns: Sequence[str], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])


def read_table(stream: IO[str]) -> list[dict[str, str]]:
    return list(csv.DictReader(stream))


def table_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    write_table(rows, columns, buf)
    return buf.getvalue()
