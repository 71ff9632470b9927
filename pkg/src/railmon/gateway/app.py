"""HTTP service: frame ingestion, labeling, dashboards, audit, chain sync.

Authorization is a fixed role matrix enforced per route; every mutating
request and every denial leaves exactly one audit entry, written to the
same tamper-evident ledger the data lives in (key `audit/log`, seq equals
the record version). Handlers are stateless; all writes serialize through
the ledger's single writer.
"""

from __future__ import annotations

import json
import math
import os
import time
from typing import Any, Optional

from fastapi import Body, Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import analysis, dsp, labeling
from ..config import Config, load_registry
from ..errors import (PermissionDeniedError, UnknownReferenceError,
                      ValidationError)
from ..ledger import ChainHead, Ledger, LedgerRecord
from ..principals import SERVICE_AUTHOR, Principal, Registry, Role
from . import schemas

AUDIT_KEY = "audit/log"
MUTATING_PATHS = frozenset({"/api/frames", "/api/labels/events",
                            "/api/labels/maintenance"})
REPORT_SCORE_LAST_N = 10

# single source of truth for the role matrix; tests enumerate it
ROUTE_ROLES: dict[tuple[str, str], frozenset[Role]] = {
    ("POST", "/api/frames"): frozenset({Role.SENSOR, Role.ADMIN}),
    ("POST", "/api/labels/events"): frozenset({Role.DRIVER, Role.MECHANIC}),
    ("POST", "/api/labels/maintenance"): frozenset({Role.MECHANIC}),
    ("GET", "/api/recommendations"): frozenset({Role.FOREMAN, Role.PARTNER,
                                                Role.ADMIN}),
    ("GET", "/api/health"): frozenset(Role),
    ("GET", "/api/report"): frozenset({Role.FOREMAN, Role.PARTNER}),
    ("GET", "/api/audit"): frozenset({Role.ADMIN}),
    ("GET", "/chain/head"): frozenset({Role.PARTNER, Role.ADMIN}),
    ("GET", "/chain/records"): frozenset({Role.PARTNER, Role.ADMIN}),
}


def _require(method: str, path: str):
    allowed = ROUTE_ROLES[(method, path)]

    def dep(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        principal = request.app.state.registry.by_token(header[7:].strip())
        if principal is None:
            raise HTTPException(status_code=401, detail="unknown token")
        request.state.principal = principal
        if principal.role not in allowed:
            raise HTTPException(
                status_code=403,
                detail=f"role {principal.role.value} may not {method} {path}")
        return principal

    return Depends(dep)


def validate_frame_obj(obj: Any) -> tuple[Optional[dsp.SpectralFrame],
                                          Optional[str]]:
    """Schema-check one uploaded frame; returns (frame, None) or (None, reason)."""
    if not isinstance(obj, dict):
        return None, "schema"
    sensor_id = obj.get("sensor_id")
    if not isinstance(sensor_id, str) or not sensor_id:
        return None, "sensor_id"
    for name in ("start_timestamp", "frame_index", "window_len", "hop",
                 "sample_rate"):
        value = obj.get(name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            return None, name
    window_len = obj["window_len"]
    if window_len < 2 or window_len & (window_len - 1):
        return None, "window_len"
    if obj["hop"] < 1:
        return None, "hop"
    if obj["sample_rate"] < 1:
        return None, "sample_rate"
    scale = obj.get("scale")
    if (isinstance(scale, bool) or not isinstance(scale, (int, float))
            or not math.isfinite(scale) or scale <= 0):
        return None, "scale"
    bins = obj.get("bins")
    if not isinstance(bins, list):
        return None, "bins"
    if len(bins) != window_len // 2 + 1:
        return None, "bins_length"
    for code in bins:
        if not isinstance(code, int) or isinstance(code, bool) \
                or not 0 <= code <= dsp.CODE_MAX:
            return None, "bins_range"
    return dsp.SpectralFrame.from_wire(obj), None


def _recommendations(store: Ledger, subject: Optional[str] = None) -> list[dict]:
    """All recommendation payloads, newest append first."""
    items: list[tuple[int, dict]] = []
    prefix = analysis.REC_KEY_PREFIX + (subject or "")
    for key in store.keys(analysis.REC_KEY_PREFIX):
        if subject is not None and key != analysis.REC_KEY_PREFIX + subject:
            continue
        for rec in store.history(key):
            items.append((rec.seq, json.loads(rec.payload)))
    items.sort(key=lambda item: item[0], reverse=True)
    return [payload for _, payload in items]


def _audit_entries(store: Ledger) -> list[schemas.AuditEntry]:
    out = []
    for rec in store.history(AUDIT_KEY):
        obj = json.loads(rec.payload)
        out.append(schemas.AuditEntry(seq=rec.version, **obj))
    return out


def _anomaly_alarms(store: Ledger, threshold: float) -> int:
    """Score the newest frames of each sensor against its own history."""
    alarms = 0
    for key in store.keys(labeling.FRAME_KEY_PREFIX):
        records = store.history(key)
        if len(records) < REPORT_SCORE_LAST_N + 2:
            continue
        frames = [dsp.SpectralFrame.from_wire(json.loads(r.payload))
                  for r in records]
        split = len(frames) - REPORT_SCORE_LAST_N
        baseline = analysis.fit_baseline(key[len(labeling.FRAME_KEY_PREFIX):],
                                         frames[:split])
        alarms += sum(1 for f in frames[split:]
                      if analysis.anomaly_score(f, baseline) > threshold)
    return alarms


def create_app(cfg: Config, *, ledger: Optional[Ledger] = None,
               registry: Optional[Registry] = None) -> FastAPI:
    app = FastAPI(title="railmon gateway", version="0.1.0")
    if registry is None:
        registry = load_registry(cfg.principals_path)
    if ledger is None:
        ledger = Ledger(cfg.ledger_path, registry.keyring())
    app.state.cfg = cfg
    app.state.registry = registry
    app.state.ledger = ledger

    @app.exception_handler(ValidationError)
    async def _on_validation(request: Request, exc: ValidationError):
        return JSONResponse(status_code=422, content={
            "detail": {"field": exc.field, "message": exc.message}})

    @app.exception_handler(PermissionDeniedError)
    async def _on_permission(request: Request, exc: PermissionDeniedError):
        return JSONResponse(status_code=403, content={"detail": str(exc)})

    @app.exception_handler(UnknownReferenceError)
    async def _on_reference(request: Request, exc: UnknownReferenceError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.middleware("http")
    async def audit_middleware(request: Request, call_next):
        try:
            response = await call_next(request)
        except Exception:
            response = JSONResponse(status_code=500,
                                    content={"detail": "internal error"})
        path = request.url.path
        outcome = None
        if response.status_code in (401, 403):
            outcome = "denied"
        elif request.method == "POST" and path in MUTATING_PATHS:
            outcome = "ok" if response.status_code < 400 else "error"
        if outcome is not None:
            principal = getattr(request.state, "principal", None)
            entry = {
                "timestamp": time.time_ns() // 1000,
                "principal_id": principal.id if principal else "anonymous",
                "request": f"{request.method} {path}",
                "outcome": outcome,
                "detail": getattr(request.state, "audit_detail",
                                  f"status={response.status_code}"),
            }
            ledger.append(AUDIT_KEY, labeling.canonical_payload(entry),
                          SERVICE_AUTHOR)
        return response

    # -- ingestion ----------------------------------------------------------

    @app.post("/api/frames", response_model=schemas.UploadResponse)
    def upload_frames(request: Request, batch: list = Body(...),
                      principal: Principal = _require("POST", "/api/frames")):
        accepted = 0
        rejected: list[tuple[int, str]] = []
        for index, obj in enumerate(batch):
            frame, reason = validate_frame_obj(obj)
            if frame is None:
                rejected.append((index, reason))
                continue
            ledger.append(labeling.FRAME_KEY_PREFIX + frame.sensor_id,
                          labeling.canonical_payload(frame.to_wire()),
                          principal.id)
            accepted += 1
        request.state.audit_detail = \
            f"accepted={accepted} rejected={len(rejected)}"
        return schemas.UploadResponse(accepted=accepted, rejected=rejected)

    # -- labeling -------------------------------------------------------------

    @app.post("/api/labels/events", response_model=schemas.EventLabelResponse)
    def post_event_label(request: Request, body: schemas.EventLabelBody,
                         principal: Principal = _require(
                             "POST", "/api/labels/events")):
        label = labeling.create_event_label(body.model_dump(), ledger,
                                            principal)
        request.state.audit_detail = f"label={label.label_id}"
        return schemas.EventLabelResponse(**label.to_json())

    @app.post("/api/labels/maintenance",
              response_model=schemas.MaintenanceResponse)
    def post_maintenance(request: Request, body: schemas.MaintenanceBody,
                         principal: Principal = _require(
                             "POST", "/api/labels/maintenance")):
        record = labeling.create_maintenance_record(body.model_dump(), ledger,
                                                    principal)
        request.state.audit_detail = f"record={record.record_id}"
        return schemas.MaintenanceResponse(**record.to_json())

    # -- dashboards -------------------------------------------------------------

    @app.get("/api/recommendations",
             response_model=list[schemas.RecommendationItem])
    def get_recommendations(subject: Optional[str] = None,
                            principal: Principal = _require(
                                "GET", "/api/recommendations")):
        return _recommendations(ledger, subject)

    @app.get("/api/health", response_model=schemas.HealthResponse)
    def get_health(principal: Principal = _require("GET", "/api/health")):
        verify = ledger.verify_chain()
        return schemas.HealthResponse(
            frames=ledger.count_records(labeling.FRAME_KEY_PREFIX),
            labels=ledger.count_records(labeling.EVENT_KEY_PREFIX)
            + ledger.count_records(labeling.MAINT_KEY_PREFIX),
            recommendations=ledger.count_records(analysis.REC_KEY_PREFIX),
            chain_length=len(ledger),
            last_verify=schemas.VerifyStatus(
                ok=verify.ok, length=verify.length,
                first_bad_seq=verify.first_bad_seq, reason=verify.reason))

    @app.get("/api/report", response_model=schemas.ReportResponse)
    def get_report(principal: Principal = _require("GET", "/api/report")):
        label_counts: dict[str, int] = {}
        for key in ledger.keys(labeling.EVENT_KEY_PREFIX):
            for rec in ledger.history(key):
                kind = json.loads(rec.payload)["event_kind"]
                label_counts[kind] = label_counts.get(kind, 0) + 1
        return schemas.ReportResponse(
            generated_at=time.time_ns() // 1000,
            frame_count=ledger.count_records(labeling.FRAME_KEY_PREFIX),
            label_counts=label_counts,
            open_recommendations=_recommendations(ledger),
            anomaly_alarms_last_n=_anomaly_alarms(
                ledger, app.state.cfg.anomaly_threshold),
            chain_verified=ledger.verify_chain().ok)

    @app.get("/api/audit", response_model=list[schemas.AuditEntry])
    def get_audit(from_seq: Optional[int] = Query(default=None, alias="from"),
                  to_seq: Optional[int] = Query(default=None, alias="to"),
                  principal: Principal = _require("GET", "/api/audit")):
        entries = _audit_entries(ledger)
        lo = from_seq if from_seq is not None else 0
        hi = to_seq if to_seq is not None else len(entries) + 1
        return [e for e in entries if lo <= e.seq <= hi]

    # -- chain sync ---------------------------------------------------------------

    @app.get("/chain/head", response_model=schemas.ChainHeadModel)
    def chain_head(principal: Principal = _require("GET", "/chain/head")):
        head = ledger.head()
        return schemas.ChainHeadModel(**head.to_json())

    @app.get("/chain/records", response_model=list[schemas.LedgerRecordModel])
    def chain_records(from_seq: int = Query(alias="from", ge=0),
                      to_seq: int = Query(alias="to", ge=0),
                      principal: Principal = _require("GET", "/chain/records")):
        if to_seq < from_seq:
            raise HTTPException(status_code=422,
                                detail="to must be >= from")
        return [schemas.LedgerRecordModel(**rec.to_json())
                for rec in ledger.records_range(from_seq, to_seq)]

    ui_dist = cfg.ui_dist
    if ui_dist and os.path.isdir(ui_dist):
        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")

    return app
