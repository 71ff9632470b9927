/** Session and draft persistence.
 *
 * The session is a pasted token plus the role the user works in; drafts
 * survive token expiry and page reloads via sessionStorage so a bounced
 * login never costs a driver their shift notes.
 */

import type { Role } from "./types.js";

export interface Session {
  role: Role;
  token: string;
  vehicleFilter: string;
}

const SESSION_KEY = "railmon.session";
const DRAFTS_KEY = "railmon.drafts";

export function saveSession(session: Session): void {
  sessionStorage.setItem(SESSION_KEY, JSON.stringify(session));
}

export function loadSession(): Session | null {
  const raw = sessionStorage.getItem(SESSION_KEY);
  if (!raw) return null;
  try {
    const parsed = JSON.parse(raw) as Session;
    return parsed.token ? parsed : null;
  } catch {
    return null;
  }
}

export function clearSession(): void {
  sessionStorage.removeItem(SESSION_KEY);
}

export interface EventDraft {
  event_kind: string;
  memo_text: string;
  vehicle_id: string;
  start_local: string;
  end_local: string;
  gps_lat: string;
  gps_lon: string;
}

export function emptyEventDraft(): EventDraft {
  return { event_kind: "normal", memo_text: "", vehicle_id: "",
           start_local: "", end_local: "", gps_lat: "", gps_lon: "" };
}

export function saveDrafts(drafts: EventDraft[]): void {
  sessionStorage.setItem(DRAFTS_KEY, JSON.stringify(drafts));
}

export function loadDrafts(): EventDraft[] {
  const raw = sessionStorage.getItem(DRAFTS_KEY);
  if (!raw) return [];
  try {
    return JSON.parse(raw) as EventDraft[];
  } catch {
    return [];
  }
}

export function clearDrafts(): void {
  sessionStorage.removeItem(DRAFTS_KEY);
}
