/** Shared test scaffolding: a recording mock fetch, response builders and
 * fixture loading. The recorder is what the undocumented-endpoint check
 * runs on: every request the app makes lands in `calls`. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchFn } from "../src/api.js";
import type { LedgerRecordWire } from "../src/types.js";

const HERE = dirname(fileURLToPath(import.meta.url));

export interface RecordedCall {
  method: string;
  path: string;
  query: Record<string, string>;
  headers: Record<string, string>;
  body: unknown;
}

export interface Recorder {
  calls: RecordedCall[];
}

export type MockHandler = (call: RecordedCall) =>
  { status: number; body: unknown } | undefined;

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Build a FetchFn serving canned handlers and recording every request. */
export function mockFetch(handler: MockHandler,
                          recorder?: Recorder): FetchFn {
  return async (url, init) => {
    const parsed = new URL(url, "http://testhost");
    const query: Record<string, string> = {};
    parsed.searchParams.forEach((value, name) => { query[name] = value; });
    const headers: Record<string, string> = {};
    for (const [name, value] of Object.entries(init.headers ?? {})) {
      headers[name.toLowerCase()] = String(value);
    }
    const call: RecordedCall = {
      method: init.method ?? "GET",
      path: parsed.pathname,
      query,
      headers,
      body: typeof init.body === "string" ? JSON.parse(init.body) : undefined,
    };
    recorder?.calls.push(call);
    const result = handler(call);
    if (!result) {
      return jsonResponse(404, { detail: "not found" });
    }
    return jsonResponse(result.status, result.body);
  };
}

/** A fetch that never connects, for the retriable-banner paths. */
export function downFetch(recorder?: Recorder): FetchFn {
  return async (url, init) => {
    if (recorder) {
      await mockFetch(() => ({ status: 500, body: {} }), recorder)(url, init);
    }
    throw new TypeError("fetch failed");
  };
}

export interface PrePostFixture {
  records: LedgerRecordWire[];
  vehicle: string;
  pre_count: number;
  post_count: number;
  expected: { band_ratio: number[]; delta_score: number };
}

export function loadPrePostFixture(): PrePostFixture {
  const raw = readFileSync(join(HERE, "fixtures", "prepost_fixture.json"),
    "utf-8");
  return JSON.parse(raw) as PrePostFixture;
}

export function flushAsync(times = 6): Promise<void> {
  let p = Promise.resolve();
  for (let i = 0; i < times; i++) p = p.then(() => undefined);
  return p;
}

export const HEALTH_OK = {
  frames: 120,
  labels: 4,
  recommendations: 2,
  chain_length: 127,
  last_verify: { ok: true, length: 127, first_bad_seq: null, reason: null },
};

export const HEALTH_TAMPERED = {
  ...HEALTH_OK,
  last_verify: { ok: false, length: 127, first_bad_seq: 34,
                 reason: "payload_hash" },
};

/** Three recommendations, deliberately out of order in the payload. */
export const THREE_RECS = [
  {
    rec_id: "R-mid", subject: "V2", predicted_issue: "flat_spot_suspected",
    confidence: 0.91, evidence: [["frames/V2:ub1", 3]] as [string, number][],
    created_at: 1_700_000_200_000_000, model_fingerprint: "f".repeat(64),
  },
  {
    rec_id: "R-new", subject: "V1", predicted_issue: "flat_spot_suspected",
    confidence: 0.988, evidence: [["frames/V1:ub1", 1],
      ["frames/V1:ub1", 2]] as [string, number][],
    created_at: 1_700_000_300_000_000, model_fingerprint: "f".repeat(64),
  },
  {
    rec_id: "R-old", subject: "V3", predicted_issue: "track_bump",
    confidence: 0.77, evidence: [] as [string, number][],
    created_at: 1_700_000_100_000_000, model_fingerprint: "f".repeat(64),
  },
];
