/** Spectral math over chain data: frame decoding, band energies and the
 * pre/post maintenance comparison shown on the dashboard.
 *
 * The numbers must agree with the backend's analysis (same dequantization,
 * same band split, same floors), so the chart shows exactly what the
 * comparison report would say.
 */

import type {
  EventLabelPayload, FrameRef, FrameWire, LedgerRecordWire,
  MaintenancePayload,
} from "./types.js";

export const CODE_MAX = 65535;
export const N_BANDS = 8;
// floor for band-energy ratios so logs stay finite on degenerate sets
export const ENERGY_FLOOR = 1e-30;

export const FRAME_KEY_PREFIX = "frames/";
export const EVENT_KEY_PREFIX = "labels/events/";
export const MAINT_KEY_PREFIX = "labels/maintenance/";

export function vehicleOfSensor(sensorId: string): string {
  return sensorId.split(":", 1)[0] ?? sensorId;
}

export function dequantize(frame: FrameWire): Float64Array {
  const mags = new Float64Array(frame.bins.length);
  for (let i = 0; i < frame.bins.length; i++) {
    mags[i] = frame.bins[i] / CODE_MAX * frame.scale;
  }
  return mags;
}

/** Split like numpy array_split: the first (len % n) parts get one extra. */
function splitSizes(length: number, parts: number): number[] {
  const base = Math.floor(length / parts);
  const extra = length % parts;
  return Array.from({ length: parts }, (_, i) => (i < extra ? base + 1 : base));
}

/** Mean squared magnitude per band over the non-DC bins, 8 values. */
export function bandEnergies(frame: FrameWire): number[] {
  const mags = dequantize(frame);
  const bands: number[] = [];
  let offset = 1;
  for (const size of splitSizes(mags.length - 1, N_BANDS)) {
    if (size === 0) {
      bands.push(0.0);
      continue;
    }
    let sum = 0;
    for (let i = offset; i < offset + size; i++) {
      sum += mags[i] * mags[i];
    }
    bands.push(sum / size);
    offset += size;
  }
  return bands;
}

function meanBands(frames: FrameWire[]): number[] {
  const acc = new Array<number>(N_BANDS).fill(0);
  for (const frame of frames) {
    const bands = bandEnergies(frame);
    for (let b = 0; b < N_BANDS; b++) acc[b] += bands[b];
  }
  return acc.map((total) => Math.max(total / frames.length, ENERGY_FLOOR));
}

export interface PrePostResult {
  bandRatio: number[];
  deltaScore: number;
}

export function comparePrePost(pre: FrameWire[],
                               post: FrameWire[]): PrePostResult {
  if (!pre.length || !post.length) {
    throw new Error("pre and post sets must be non-empty");
  }
  const preBands = meanBands(pre);
  const postBands = meanBands(post);
  const bandRatio = postBands.map((p, b) => p / preBands[b]);
  const deltaScore = Math.max(...bandRatio.map((r) => Math.abs(Math.log2(r))));
  return { bandRatio, deltaScore };
}

// -- chain decoding ----------------------------------------------------------

export interface FrameRecord {
  key: string;
  version: number;
  seq: number;
  frame: FrameWire;
}

export interface ChainIndex {
  frames: FrameRecord[];
  events: EventLabelPayload[];
  maintenance: MaintenancePayload[];
  byRef: Map<string, unknown>;
}

export function decodePayload(record: LedgerRecordWire): unknown {
  const raw = atob(record.payload_b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return JSON.parse(new TextDecoder().decode(bytes));
}

export function refKey(ref: FrameRef): string {
  return `${ref[0]}@${ref[1]}`;
}

export function indexChain(records: LedgerRecordWire[]): ChainIndex {
  const index: ChainIndex = {
    frames: [], events: [], maintenance: [], byRef: new Map(),
  };
  for (const record of records) {
    const payload = decodePayload(record);
    index.byRef.set(refKey([record.key, record.version]), payload);
    if (record.key.startsWith(FRAME_KEY_PREFIX)) {
      index.frames.push({
        key: record.key, version: record.version, seq: record.seq,
        frame: payload as FrameWire,
      });
    } else if (record.key.startsWith(EVENT_KEY_PREFIX)) {
      index.events.push(payload as EventLabelPayload);
    } else if (record.key.startsWith(MAINT_KEY_PREFIX)) {
      index.maintenance.push(payload as MaintenancePayload);
    }
  }
  return index;
}

// -- maintenance pairing -------------------------------------------------------

export interface MaintenancePair {
  vehicleId: string;
  entry: MaintenancePayload;
  exit: MaintenancePayload;
}

/** Entry records matched with the next exit for the same vehicle. */
export function findMaintenancePairs(records: MaintenancePayload[]
                                     ): MaintenancePair[] {
  const byVehicle = new Map<string, MaintenancePayload[]>();
  for (const record of records) {
    const list = byVehicle.get(record.vehicle_id) ?? [];
    list.push(record);
    byVehicle.set(record.vehicle_id, list);
  }
  const pairs: MaintenancePair[] = [];
  for (const [vehicleId, list] of byVehicle) {
    list.sort((a, b) => a.timestamp - b.timestamp);
    let open: MaintenancePayload | null = null;
    for (const record of list) {
      if (record.phase === "entry") {
        open = record;
      } else if (record.phase === "exit" && open !== null) {
        pairs.push({ vehicleId, entry: open, exit: record });
        open = null;
      }
    }
  }
  pairs.sort((a, b) => a.exit.timestamp - b.exit.timestamp);
  return pairs;
}

export interface PairComparison extends MaintenancePair {
  preCount: number;
  postCount: number;
  result: PrePostResult | null;
}

/** Frames before entry vs frames at/after exit, per completed pair. */
export function comparePairs(index: ChainIndex): PairComparison[] {
  const pairs = findMaintenancePairs(index.maintenance);
  return pairs.map((pair) => {
    const vehicleFrames = index.frames
      .filter((f) => vehicleOfSensor(f.frame.sensor_id) === pair.vehicleId)
      .map((f) => f.frame);
    const pre = vehicleFrames.filter(
      (f) => f.start_timestamp < pair.entry.timestamp);
    const post = vehicleFrames.filter(
      (f) => f.start_timestamp >= pair.exit.timestamp);
    return {
      ...pair,
      preCount: pre.length,
      postCount: post.length,
      result: pre.length && post.length ? comparePrePost(pre, post) : null,
    };
  });
}
