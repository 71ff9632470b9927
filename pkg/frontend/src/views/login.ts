/** Token-paste login. There is no user database: a session is a bearer
 * token plus the role whose workspace should open. The token is checked
 * against the gateway before the session starts; the server keeps
 * enforcing real permissions on every call after that. */

import type { ApiClient } from "../api.js";
import { AuthError, NetworkError } from "../api.js";
import { clearFieldErrors, fieldRow, h, setFieldError, showNotice }
  from "../dom.js";
import type { Session } from "../session.js";
import type { Role } from "../types.js";
import { ROLES } from "../types.js";

export interface LoginOptions {
  notice?: string;
  makeClient: (token: string) => ApiClient;
  onLogin: (session: Session) => void;
}

export function renderLogin(root: HTMLElement, opts: LoginOptions): void {
  const tokenInput = h("input", {
    type: "password", name: "token", autocomplete: "off",
    placeholder: "paste access token",
  }) as HTMLInputElement;
  const roleSelect = h("select", { name: "role" }) as HTMLSelectElement;
  for (const role of ROLES) {
    if (role === "sensor") continue;  // sensors are machines, not users
    roleSelect.append(h("option", { value: role }, role));
  }
  roleSelect.value = "driver";

  const form = h("form", { class: "login-form" },
    h("h1", {}, "railmon"),
    fieldRow("token", "Access token", tokenInput),
    fieldRow("role", "Workspace", roleSelect),
    h("button", { type: "submit" }, "Connect"));

  const connect = async () => {
    clearFieldErrors(form);
    const token = tokenInput.value.trim();
    if (!token) {
      setFieldError(form, "token", "token is required");
      return;
    }
    const client = opts.makeClient(token);
    try {
      await client.health();
    } catch (err) {
      if (err instanceof AuthError) {
        setFieldError(form, "token", "token was rejected by the gateway");
        return;
      }
      if (err instanceof NetworkError) {
        showNotice(form, "error", "gateway unreachable, check the connection",
          () => void connect());
        return;
      }
      throw err;
    }
    opts.onLogin({
      role: roleSelect.value as Role, token, vehicleFilter: "",
    });
  };

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void connect();
  });

  clearRoot(root);
  root.append(h("div", { class: "login-wrap" }, form));
  if (opts.notice) {
    showNotice(form, "warn", opts.notice);
  }
}

function clearRoot(root: HTMLElement): void {
  while (root.firstChild) root.removeChild(root.firstChild);
}
