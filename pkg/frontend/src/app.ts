/** App shell: session bootstrap, role-based navigation, auth fallback.
 *
 * Roles map to workspaces: driver gets the event form, mechanic gets
 * workshop records plus the event form, foreman/partner/admin get the
 * dashboard. The server enforces real permissions regardless; denied
 * panels explain themselves instead of going blank.
 */

import { ApiClient, type FetchFn } from "./api.js";
import { clear, h } from "./dom.js";
import type { Session } from "./session.js";
import { clearSession, loadSession, saveSession } from "./session.js";
import type { ViewContext } from "./views/context.js";
import { renderDashboard } from "./views/dashboard.js";
import { renderEvents } from "./views/events.js";
import { renderLogin } from "./views/login.js";
import { renderMaintenance } from "./views/maintenance.js";

type TabName = "events" | "maintenance" | "dashboard";

const TABS_BY_ROLE: Record<string, TabName[]> = {
  driver: ["events"],
  mechanic: ["maintenance", "events"],
  foreman: ["dashboard"],
  partner: ["dashboard"],
  admin: ["dashboard"],
};

const TAB_TITLES: Record<TabName, string> = {
  events: "Events",
  maintenance: "Workshop",
  dashboard: "Dashboard",
};

const TAB_RENDERERS: Record<TabName,
  (root: HTMLElement, ctx: ViewContext) => void> = {
  events: renderEvents,
  maintenance: renderMaintenance,
  dashboard: renderDashboard,
};

export interface AppOptions {
  base?: string;
  fetchFn?: FetchFn;
}

export function createApp(root: HTMLElement, opts: AppOptions = {}): void {
  const base = opts.base ?? "";
  const makeClient = (token: string) =>
    new ApiClient(base, token, opts.fetchFn);

  const showLogin = (notice?: string) => {
    renderLogin(root, {
      notice,
      makeClient,
      onLogin: (session) => {
        saveSession(session);
        showWorkspace(session);
      },
    });
  };

  const showWorkspace = (session: Session) => {
    const tabs = TABS_BY_ROLE[session.role] ?? ["events"];
    const ctx: ViewContext = {
      client: makeClient(session.token),
      session,
      onAuthExpired: (notice) => {
        clearSession();
        showLogin(notice);
      },
    };

    const content = h("main", { class: "content" });
    const openTab = (tab: TabName) => {
      clear(content);
      for (const btn of nav.querySelectorAll("button[data-tab]")) {
        btn.classList.toggle("active",
          btn.getAttribute("data-tab") === tab);
      }
      TAB_RENDERERS[tab](content, ctx);
    };

    const nav = h("nav", { class: "tabs" });
    for (const tab of tabs) {
      nav.append(h("button", {
        type: "button", "data-tab": tab, onclick: () => openTab(tab),
      }, TAB_TITLES[tab]));
    }

    const header = h("header", { class: "topbar" },
      h("span", { class: "brand" }, "railmon"),
      nav,
      h("span", { class: "session-role" }, session.role),
      h("button", {
        type: "button", class: "logout",
        onclick: () => {
          clearSession();
          showLogin();
        },
      }, "Log out"));

    clear(root);
    root.append(header, content);
    openTab(tabs[0]);
  };

  const existing = loadSession();
  if (existing) {
    showWorkspace(existing);
  } else {
    showLogin();
  }
}
