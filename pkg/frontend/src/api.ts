/** Typed client for the gateway HTTP API.
 *
 * Every request the UI makes goes through this module, and only the
 * endpoints listed in DOCUMENTED_ENDPOINTS exist here; the recorded
 * traffic test holds the app to that set.
 */

import type {
  AuditEntry, ChainHead, EventLabelBody, EventLabelResponse, HealthResponse,
  LedgerRecordWire, MaintenanceBody, MaintenanceResponse, RecommendationItem,
  ReportResponse, ValidationDetail,
} from "./types.js";

export const DOCUMENTED_ENDPOINTS = [
  "POST /api/frames",
  "POST /api/labels/events",
  "POST /api/labels/maintenance",
  "GET /api/recommendations",
  "GET /api/health",
  "GET /api/report",
  "GET /api/audit",
  "GET /chain/head",
  "GET /chain/records",
] as const;

export type FetchFn = (url: string, init: RequestInit) => Promise<Response>;

/** Server said no: carries the HTTP status and the response detail. */
export class ApiError extends Error {
  constructor(readonly status: number,
              readonly detail: string | ValidationDetail) {
    super(typeof detail === "string"
      ? detail : `${detail.field}: ${detail.message}`);
    this.name = "ApiError";
  }
}

/** Missing or rejected token; the session should fall back to login. */
export class AuthError extends ApiError {
  constructor(status: number, detail: string) {
    super(status, detail);
    this.name = "AuthError";
  }
}

/** Request never reached the server (or the response never arrived). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(cause instanceof Error ? cause.message : String(cause));
    this.name = "NetworkError";
  }
}

export function isFieldDetail(detail: string | ValidationDetail
                              ): detail is ValidationDetail {
  return typeof detail === "object" && detail !== null
    && typeof detail.field === "string";
}

export class ApiClient {
  private readonly fetchFn: FetchFn;

  constructor(readonly base: string, readonly token: string,
              fetchFn?: FetchFn) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown,
                           query?: Record<string, string>): Promise<T> {
    let url = this.base + path;
    if (query && Object.keys(query).length) {
      url += "?" + new URLSearchParams(query).toString();
    }
    const init: RequestInit = {
      method,
      headers: {
        "Authorization": `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    let response: Response;
    try {
      response = await this.fetchFn(url, init);
    } catch (err) {
      throw new NetworkError(err);
    }
    if (response.ok) {
      return await response.json() as T;
    }
    let detail: string | ValidationDetail = `HTTP ${response.status}`;
    try {
      const parsed = await response.json() as { detail?: unknown };
      if (typeof parsed.detail === "string") {
        detail = parsed.detail;
      } else if (isFieldDetail(parsed.detail as ValidationDetail)) {
        detail = parsed.detail as ValidationDetail;
      } else if (Array.isArray(parsed.detail) && parsed.detail.length) {
        // FastAPI body-validation shape: [{loc: ["body", field], msg}]
        const first = parsed.detail[0] as { loc?: unknown[]; msg?: string };
        const loc = Array.isArray(first.loc) ? first.loc : [];
        detail = {
          field: String(loc[loc.length - 1] ?? "body"),
          message: String(first.msg ?? "invalid value"),
        };
      }
    } catch {
      // non-JSON error body, keep the status line
    }
    if (response.status === 401) {
      throw new AuthError(401, detail as string);
    }
    throw new ApiError(response.status, detail);
  }

  health(): Promise<HealthResponse> {
    return this.request("GET", "/api/health");
  }

  report(): Promise<ReportResponse> {
    return this.request("GET", "/api/report");
  }

  recommendations(subject?: string): Promise<RecommendationItem[]> {
    return this.request("GET", "/api/recommendations", undefined,
      subject ? { subject } : undefined);
  }

  postEventLabel(body: EventLabelBody): Promise<EventLabelResponse> {
    return this.request("POST", "/api/labels/events", body);
  }

  postMaintenance(body: MaintenanceBody): Promise<MaintenanceResponse> {
    return this.request("POST", "/api/labels/maintenance", body);
  }

  audit(fromSeq?: number, toSeq?: number): Promise<AuditEntry[]> {
    const query: Record<string, string> = {};
    if (fromSeq !== undefined) query["from"] = String(fromSeq);
    if (toSeq !== undefined) query["to"] = String(toSeq);
    return this.request("GET", "/api/audit", undefined, query);
  }

  chainHead(): Promise<ChainHead> {
    return this.request("GET", "/chain/head");
  }

  /** Records in [fromSeq, toSeq), the server's half-open convention. */
  chainRecords(fromSeq: number, toSeq: number): Promise<LedgerRecordWire[]> {
    return this.request("GET", "/chain/records", undefined,
      { from: String(fromSeq), to: String(toSeq) });
  }
}
