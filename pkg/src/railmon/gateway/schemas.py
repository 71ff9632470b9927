"""Pydantic request/response bodies for the HTTP API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class UploadResponse(BaseModel):
    accepted: int
    rejected: list[tuple[int, str]] = Field(default_factory=list)


class EventLabelBody(BaseModel):
    event_kind: str
    memo_text: str = ""
    time_start: int
    time_end: int
    vehicle_id: str
    gps_lat: Optional[float] = None
    gps_lon: Optional[float] = None
    label_id: Optional[str] = None


class EventLabelResponse(BaseModel):
    label_id: str
    author: str
    event_kind: str
    memo_text: str
    time_start: int
    time_end: int
    vehicle_id: str
    gps_lat: Optional[float] = None
    gps_lon: Optional[float] = None


class DefectBody(BaseModel):
    component: str
    defect_kind: str
    severity: str


class MaintenanceBody(BaseModel):
    vehicle_id: str
    phase: str
    timestamp: int
    defects: list[DefectBody] = Field(default_factory=list)
    work_performed: str = ""
    pass_ref: Optional[str] = None
    record_id: Optional[str] = None


class MaintenanceResponse(BaseModel):
    record_id: str
    vehicle_id: str
    phase: str
    defects: list[DefectBody]
    work_performed: str
    author: str
    timestamp: int
    pass_ref: Optional[str] = None


class RecommendationItem(BaseModel):
    rec_id: str
    subject: str
    predicted_issue: str
    confidence: float
    evidence: list[tuple[str, int]]
    created_at: int
    model_fingerprint: str


class VerifyStatus(BaseModel):
    ok: bool
    length: int
    first_bad_seq: Optional[int] = None
    reason: Optional[str] = None


class HealthResponse(BaseModel):
    frames: int
    labels: int
    recommendations: int
    chain_length: int
    last_verify: VerifyStatus


class ReportResponse(BaseModel):
    generated_at: int
    frame_count: int
    label_counts: dict[str, int]
    open_recommendations: list[RecommendationItem]
    anomaly_alarms_last_n: int
    chain_verified: bool


class AuditEntry(BaseModel):
    seq: int
    timestamp: int
    principal_id: str
    request: str  # "METHOD /path"
    outcome: str  # ok | denied | error
    detail: str


class ChainHeadModel(BaseModel):
    length: int
    head_hash: str


class LedgerRecordModel(BaseModel):
    seq: int
    key: str
    version: int
    payload_b64: str
    payload_hash: str
    prev_hash: str
    record_hash: str
    author: str
    auth_tag: str
    timestamp: int
