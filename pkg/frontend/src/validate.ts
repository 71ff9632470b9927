/** Client-side pre-validation mirroring the gateway's field rules.
 *
 * The checks run in the same order and produce the same field names and
 * messages as the server, so a form caught locally looks exactly like a
 * form bounced by the API. Local rejection means no request is sent.
 */

import type {
  DefectBody, EventLabelBody, MaintenanceBody, ValidationDetail,
} from "./types.js";
import { DEFECT_SEVERITIES, EVENT_KINDS, MAINTENANCE_PHASES } from "./types.js";

function missing(value: unknown): boolean {
  return value === undefined || value === null;
}

function isInt(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value);
}

export function validateEventBody(body: EventLabelBody
                                  ): ValidationDetail | null {
  const required: (keyof EventLabelBody)[] = [
    "event_kind", "memo_text", "time_start", "time_end", "vehicle_id"];
  for (const name of required) {
    if (missing(body[name])) {
      return { field: name, message: "field is required" };
    }
  }
  const kind = body.event_kind as string;
  if (!(EVENT_KINDS as readonly string[]).includes(kind)) {
    return { field: "event_kind", message: `unknown kind '${kind}'` };
  }
  if (!isInt(body.time_start) || !isInt(body.time_end)) {
    return { field: "time_start", message: "times must be integers" };
  }
  if (body.time_start > body.time_end) {
    return { field: "time_end", message: "time_end must be >= time_start" };
  }
  const memo = String(body.memo_text);
  if (kind === "other" && memo.trim() === "") {
    return { field: "memo_text",
             message: "event_kind 'other' requires a memo" };
  }
  if (String(body.vehicle_id) === "") {
    return { field: "vehicle_id", message: "vehicle_id must be non-empty" };
  }
  const axes: [("gps_lat" | "gps_lon"), number, number][] = [
    ["gps_lat", -90.0, 90.0], ["gps_lon", -180.0, 180.0]];
  for (const [axis, lo, hi] of axes) {
    const value = body[axis];
    if (value !== undefined && value !== null && !(lo <= value && value <= hi)) {
      return { field: axis,
               message: `must be within [${lo.toFixed(1)}, ${hi.toFixed(1)}]` };
    }
  }
  return null;
}

function defectComplete(defect: DefectBody): boolean {
  return defect.component !== "" && defect.defect_kind !== ""
    && (DEFECT_SEVERITIES as readonly string[]).includes(defect.severity);
}

export function validateMaintenanceBody(body: MaintenanceBody
                                        ): ValidationDetail | null {
  const required: (keyof MaintenanceBody)[] = [
    "vehicle_id", "phase", "timestamp"];
  for (const name of required) {
    if (missing(body[name])) {
      return { field: name, message: "field is required" };
    }
  }
  const phase = body.phase as string;
  if (!(MAINTENANCE_PHASES as readonly string[]).includes(phase)) {
    return { field: "phase", message: `unknown phase '${phase}'` };
  }
  const defects = body.defects ?? [];
  for (let i = 0; i < defects.length; i++) {
    if (!defectComplete(defects[i])) {
      return {
        field: `defects[${i}]`,
        message: "defect needs component, defect_kind and a valid severity",
      };
    }
  }
  const work = body.work_performed ?? "";
  if (phase === "exit" && defects.length > 0 && work.trim() === "") {
    return { field: "work_performed",
             message: "exit record with defects requires work_performed" };
  }
  if (String(body.vehicle_id) === "") {
    return { field: "vehicle_id", message: "vehicle_id must be non-empty" };
  }
  if (!isInt(body.timestamp)) {
    return { field: "timestamp", message: "must be integer microseconds" };
  }
  return null;
}

/** datetime-local input value to integer microseconds, null when unset. */
export function localTimeToMicros(value: string): number | null {
  if (!value) return null;
  const ms = new Date(value).getTime();
  return Number.isNaN(ms) ? null : ms * 1000;
}

export function microsToDate(us: number): string {
  return new Date(us / 1000).toISOString().replace("T", " ").slice(0, 19);
}
