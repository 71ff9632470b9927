"""Human annotations and their linkage to spectral frames.

Drivers file post-shift event forms, mechanics document vehicle state on
workshop entry and exit. Labels are linked to the sensor frames their time
window covers, producing the enriched records downstream training consumes.
All writes are ledger appends; nothing here edits an existing record.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import dsp
from .errors import (PermissionDeniedError, UnknownReferenceError,
                     ValidationError)
from .ledger import Ledger
from .principals import Principal, Role
from .simkit import vehicle_of_sensor

EVENT_KEY_PREFIX = "labels/events/"
MAINT_KEY_PREFIX = "labels/maintenance/"
LINKED_KEY_PREFIX = "labeled/"
FRAME_KEY_PREFIX = "frames/"

# drivers log times from memory, so the default linkage window is padded
DEFAULT_LINK_TOLERANCE_US = 2_000_000


class EventKind(str, Enum):
    TRACK_BUMP = "track_bump"
    FLAT_SPOT_SUSPECTED = "flat_spot_suspected"
    HARD_BRAKING = "hard_braking"
    SWITCH_CROSSING = "switch_crossing"
    NORMAL = "normal"
    OTHER = "other"


class MaintenancePhase(str, Enum):
    ENTRY = "entry"
    EXIT = "exit"


class DefectSeverity(str, Enum):
    MINOR = "minor"
    MAJOR = "major"
    CRITICAL = "critical"


@dataclass(frozen=True)
class EventLabel:
    label_id: str
    author: str
    event_kind: EventKind
    memo_text: str
    time_start: int  # microseconds
    time_end: int
    vehicle_id: str
    gps_lat: Optional[float] = None
    gps_lon: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "label_id": self.label_id,
            "author": self.author,
            "event_kind": self.event_kind.value,
            "memo_text": self.memo_text,
            "time_start": self.time_start,
            "time_end": self.time_end,
            "vehicle_id": self.vehicle_id,
            "gps_lat": self.gps_lat,
            "gps_lon": self.gps_lon,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EventLabel":
        return cls(label_id=str(obj["label_id"]), author=str(obj["author"]),
                   event_kind=EventKind(obj["event_kind"]),
                   memo_text=str(obj["memo_text"]),
                   time_start=int(obj["time_start"]),
                   time_end=int(obj["time_end"]),
                   vehicle_id=str(obj["vehicle_id"]),
                   gps_lat=obj.get("gps_lat"), gps_lon=obj.get("gps_lon"))


@dataclass(frozen=True)
class Defect:
    component: str
    defect_kind: str
    severity: DefectSeverity

    def to_json(self) -> dict:
        return {"component": self.component, "defect_kind": self.defect_kind,
                "severity": self.severity.value}

    @classmethod
    def from_json(cls, obj: dict) -> "Defect":
        return cls(component=str(obj["component"]),
                   defect_kind=str(obj["defect_kind"]),
                   severity=DefectSeverity(obj["severity"]))


@dataclass(frozen=True)
class MaintenanceRecord:
    record_id: str
    vehicle_id: str
    phase: MaintenancePhase
    defects: tuple[Defect, ...]
    work_performed: str
    author: str
    timestamp: int  # microseconds
    pass_ref: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "vehicle_id": self.vehicle_id,
            "phase": self.phase.value,
            "defects": [d.to_json() for d in self.defects],
            "work_performed": self.work_performed,
            "author": self.author,
            "timestamp": self.timestamp,
            "pass_ref": self.pass_ref,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MaintenanceRecord":
        return cls(record_id=str(obj["record_id"]),
                   vehicle_id=str(obj["vehicle_id"]),
                   phase=MaintenancePhase(obj["phase"]),
                   defects=tuple(Defect.from_json(d) for d in obj["defects"]),
                   work_performed=str(obj["work_performed"]),
                   author=str(obj["author"]),
                   timestamp=int(obj["timestamp"]),
                   pass_ref=obj.get("pass_ref"))


@dataclass(frozen=True)
class LinkedWindow:
    label_id: str
    frame_keys: tuple[tuple[str, int], ...]  # (ledger key, version)
    link_tolerance: int  # microseconds

    def to_json(self) -> dict:
        return {"label_id": self.label_id,
                "frame_keys": [[k, v] for k, v in self.frame_keys],
                "link_tolerance": self.link_tolerance}

    @classmethod
    def from_json(cls, obj: dict) -> "LinkedWindow":
        return cls(label_id=str(obj["label_id"]),
                   frame_keys=tuple((str(k), int(v))
                                    for k, v in obj["frame_keys"]),
                   link_tolerance=int(obj["link_tolerance"]))


def canonical_payload(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _require_role(author: Principal, allowed: Sequence[Role]) -> None:
    if author.role not in allowed:
        raise PermissionDeniedError(
            f"role {author.role.value} may not perform this operation")


def validate_event_fields(obj: dict) -> EventLabel:
    """Validate raw form fields; raises ValidationError naming the field."""
    for name in ("event_kind", "memo_text", "time_start", "time_end",
                 "vehicle_id"):
        if name not in obj or obj[name] is None:
            raise ValidationError(name, "field is required")
    try:
        kind = EventKind(obj["event_kind"])
    except ValueError:
        raise ValidationError("event_kind",
                              f"unknown kind {obj['event_kind']!r}") from None
    try:
        t0, t1 = int(obj["time_start"]), int(obj["time_end"])
    except (TypeError, ValueError):
        raise ValidationError("time_start", "times must be integers") from None
    if t0 > t1:
        raise ValidationError("time_end", "time_end must be >= time_start")
    memo = str(obj["memo_text"])
    if kind is EventKind.OTHER and not memo.strip():
        raise ValidationError("memo_text",
                              "event_kind 'other' requires a memo")
    vehicle = str(obj["vehicle_id"])
    if not vehicle:
        raise ValidationError("vehicle_id", "vehicle_id must be non-empty")
    for axis, lo, hi in (("gps_lat", -90.0, 90.0), ("gps_lon", -180.0, 180.0)):
        value = obj.get(axis)
        if value is not None and not lo <= float(value) <= hi:
            raise ValidationError(axis, f"must be within [{lo}, {hi}]")
    return EventLabel(
        label_id=str(obj.get("label_id") or uuid.uuid4()),
        author=str(obj.get("author", "")),
        event_kind=kind, memo_text=memo, time_start=t0, time_end=t1,
        vehicle_id=vehicle,
        gps_lat=None if obj.get("gps_lat") is None else float(obj["gps_lat"]),
        gps_lon=None if obj.get("gps_lon") is None else float(obj["gps_lon"]))


def create_event_label(form: dict, store: Ledger,
                       author: Principal) -> EventLabel:
    _require_role(author, (Role.DRIVER, Role.MECHANIC))
    label = validate_event_fields({**form, "author": author.id})
    store.append(EVENT_KEY_PREFIX + label.vehicle_id,
                 canonical_payload(label.to_json()), author.id)
    return label


def validate_maintenance_fields(obj: dict) -> MaintenanceRecord:
    for name in ("vehicle_id", "phase", "timestamp"):
        if name not in obj or obj[name] is None:
            raise ValidationError(name, "field is required")
    try:
        phase = MaintenancePhase(obj["phase"])
    except ValueError:
        raise ValidationError("phase",
                              f"unknown phase {obj['phase']!r}") from None
    raw_defects = obj.get("defects") or []
    defects = []
    for i, d in enumerate(raw_defects):
        try:
            defects.append(Defect(component=str(d["component"]),
                                  defect_kind=str(d["defect_kind"]),
                                  severity=DefectSeverity(d["severity"])))
        except (KeyError, TypeError, ValueError):
            raise ValidationError(
                f"defects[{i}]",
                "defect needs component, defect_kind and a valid severity"
            ) from None
    work = str(obj.get("work_performed") or "")
    if phase is MaintenancePhase.EXIT and defects and not work.strip():
        raise ValidationError(
            "work_performed",
            "exit record with defects requires work_performed")
    vehicle = str(obj["vehicle_id"])
    if not vehicle:
        raise ValidationError("vehicle_id", "vehicle_id must be non-empty")
    try:
        ts = int(obj["timestamp"])
    except (TypeError, ValueError):
        raise ValidationError("timestamp", "must be integer microseconds") from None
    return MaintenanceRecord(
        record_id=str(obj.get("record_id") or uuid.uuid4()),
        vehicle_id=vehicle, phase=phase, defects=tuple(defects),
        work_performed=work, author=str(obj.get("author", "")),
        timestamp=ts, pass_ref=obj.get("pass_ref"))


def create_maintenance_record(form: dict, store: Ledger,
                              author: Principal) -> MaintenanceRecord:
    _require_role(author, (Role.MECHANIC,))
    record = validate_maintenance_fields({**form, "author": author.id})
    store.append(MAINT_KEY_PREFIX + record.vehicle_id,
                 canonical_payload(record.to_json()), author.id)
    return record


def maintenance_history(store: Ledger, vehicle_id: str) -> list[MaintenanceRecord]:
    return [MaintenanceRecord.from_json(json.loads(rec.payload))
            for rec in store.history(MAINT_KEY_PREFIX + vehicle_id)]


def pair_up(store: Ledger, vehicle_id: str
            ) -> list[tuple[MaintenanceRecord, MaintenanceRecord]]:
    """Match each entry to the nearest subsequent exit for the vehicle.

    An intervening entry abandons the previous unmatched one.
    """
    records = sorted(maintenance_history(store, vehicle_id),
                     key=lambda r: r.timestamp)
    pairs = []
    open_entry: Optional[MaintenanceRecord] = None
    for rec in records:
        if rec.phase is MaintenancePhase.ENTRY:
            open_entry = rec
        elif open_entry is not None:
            pairs.append((open_entry, rec))
            open_entry = None
    return pairs


def frame_span(frame: dsp.SpectralFrame) -> tuple[int, int]:
    """Half-open [start, end) time span of one frame in microseconds."""
    return frame.start_timestamp, frame.start_timestamp + frame.duration_us


def spans_intersect(frame_start: int, frame_end: int,
                    window_start: int, window_end: int) -> bool:
    """Half-open frame span vs closed padded label window."""
    return frame_start <= window_end and frame_end > window_start


def link_label_to_frames(label: EventLabel, store: Ledger,
                         tolerance: int = DEFAULT_LINK_TOLERANCE_US, *,
                         author: str, persist: bool = True) -> LinkedWindow:
    """Collect all frame refs of the label's vehicle overlapping its window."""
    stored = store.history(EVENT_KEY_PREFIX + label.vehicle_id)
    wanted = canonical_payload(label.to_json())
    if not any(rec.payload == wanted for rec in stored):
        raise UnknownReferenceError(
            f"label {label.label_id!r} is not in the ledger")

    lo = label.time_start - tolerance
    hi = label.time_end + tolerance
    refs = []
    for key in store.keys(FRAME_KEY_PREFIX):
        sensor_id = key[len(FRAME_KEY_PREFIX):]
        if vehicle_of_sensor(sensor_id) != label.vehicle_id:
            continue
        for rec in store.history(key):
            frame = dsp.SpectralFrame.from_wire(json.loads(rec.payload))
            start, end = frame_span(frame)
            if spans_intersect(start, end, lo, hi):
                refs.append((key, rec.version))
    refs.sort()
    window = LinkedWindow(label_id=label.label_id, frame_keys=tuple(refs),
                          link_tolerance=tolerance)
    if persist:
        store.append(LINKED_KEY_PREFIX + label.label_id,
                     canonical_payload(window.to_json()), author)
    return window
