import type { ApiClient } from "../api.js";
import type { Session } from "../session.js";

/** What every workspace view gets from the app shell. */
export interface ViewContext {
  client: ApiClient;
  session: Session;
  /** Token died mid-session: return to login, keeping local state. */
  onAuthExpired: (notice: string) => void;
}
