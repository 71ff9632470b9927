/** Wire types for the gateway JSON API. Field names match the server. */

export type Role = "sensor" | "driver" | "mechanic" | "foreman" | "partner"
  | "admin";

export const ROLES: Role[] = ["sensor", "driver", "mechanic", "foreman",
  "partner", "admin"];

export const EVENT_KINDS = ["track_bump", "flat_spot_suspected",
  "hard_braking", "switch_crossing", "normal", "other"] as const;
export type EventKind = typeof EVENT_KINDS[number];

export const MAINTENANCE_PHASES = ["entry", "exit"] as const;
export type MaintenancePhase = typeof MAINTENANCE_PHASES[number];

export const DEFECT_SEVERITIES = ["minor", "major", "critical"] as const;
export type DefectSeverity = typeof DEFECT_SEVERITIES[number];

export interface EventLabelBody {
  event_kind: string | null;
  memo_text: string | null;
  time_start: number | null;
  time_end: number | null;
  vehicle_id: string | null;
  gps_lat?: number | null;
  gps_lon?: number | null;
  label_id?: string | null;
}

export interface EventLabelResponse {
  label_id: string;
  author: string;
  event_kind: string;
  memo_text: string;
  time_start: number;
  time_end: number;
  vehicle_id: string;
  gps_lat: number | null;
  gps_lon: number | null;
}

export interface DefectBody {
  component: string;
  defect_kind: string;
  severity: string;
}

export interface MaintenanceBody {
  vehicle_id: string | null;
  phase: string | null;
  timestamp: number | null;
  defects: DefectBody[];
  work_performed: string;
  pass_ref?: string | null;
  record_id?: string | null;
}

export interface MaintenanceResponse {
  record_id: string;
  vehicle_id: string;
  phase: string;
  defects: DefectBody[];
  work_performed: string;
  author: string;
  timestamp: number;
  pass_ref: string | null;
}

/** Evidence reference: [ledger key, version]. */
export type FrameRef = [string, number];

export interface RecommendationItem {
  rec_id: string;
  subject: string;
  predicted_issue: string;
  confidence: number;
  evidence: FrameRef[];
  created_at: number;
  model_fingerprint: string;
}

export interface VerifyStatus {
  ok: boolean;
  length: number;
  first_bad_seq: number | null;
  reason: string | null;
}

export interface HealthResponse {
  frames: number;
  labels: number;
  recommendations: number;
  chain_length: number;
  last_verify: VerifyStatus;
}

export interface ReportResponse {
  generated_at: number;
  frame_count: number;
  label_counts: Record<string, number>;
  open_recommendations: RecommendationItem[];
  anomaly_alarms_last_n: number;
  chain_verified: boolean;
}

export interface AuditEntry {
  seq: number;
  timestamp: number;
  principal_id: string;
  request: string;
  outcome: string;
  detail: string;
}

export interface ChainHead {
  length: number;
  head_hash: string;
}

export interface LedgerRecordWire {
  seq: number;
  key: string;
  version: number;
  payload_b64: string;
  payload_hash: string;
  prev_hash: string;
  record_hash: string;
  author: string;
  auth_tag: string;
  timestamp: number;
}

/** Spectral frame as stored in frame record payloads. */
export interface FrameWire {
  sensor_id: string;
  start_timestamp: number;
  frame_index: number;
  window_len: number;
  hop: number;
  sample_rate: number;
  scale: number;
  bins: number[];
}

/** Event label payload as stored under labels/events/<vehicle>. */
export interface EventLabelPayload extends EventLabelResponse {}

/** Maintenance payload as stored under labels/maintenance/<vehicle>. */
export interface MaintenancePayload extends MaintenanceResponse {}

export interface ValidationDetail {
  field: string;
  message: string;
}
