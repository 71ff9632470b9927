/** Round trips against a real gateway process.
 *
 * A scratch deployment is spawned with the backend CLI and the UI talks
 * to it over actual HTTP: the driver form creates a label that is then
 * retrieved through the chain API, the server's own validation errors
 * land on the offending field, and the dashboard reflects live state.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { mkdtemp, rm } from "node:fs/promises";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

import { afterAll, beforeAll, beforeEach, describe, expect, it }
  from "vitest";

import { ApiClient, ApiError, isFieldDetail } from "../src/api.js";
import { createApp } from "../src/app.js";
import { setFieldError } from "../src/dom.js";
import { indexChain } from "../src/spectral.js";
import { validateEventBody } from "../src/validate.js";
import { flushAsync } from "./helpers.js";

const run = promisify(execFile);
const FRONTEND_DIR = dirname(dirname(fileURLToPath(import.meta.url)));

let workdir: string;
let siteDir: string;
let server: ChildProcess | null = null;
let base: string;
const tokens: Record<string, string> = {};

/** Point the happy-dom window at the gateway origin. The real deployment
 * serves the UI from the gateway itself (/ui/), so same-origin relative
 * requests are exactly the production shape. */
function adoptGatewayOrigin(): void {
  (window as unknown as {
    happyDOM: { setURL(url: string): void };
  }).happyDOM.setURL(base + "/ui/");
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const { port } = probe.address() as { port: number };
      probe.close(() => resolve(port));
    });
  });
}

async function waitForGateway(client: ApiClient): Promise<void> {
  const deadline = Date.now() + 30_000;
  let lastErr: unknown = null;
  while (Date.now() < deadline) {
    try {
      await client.health();
      return;
    } catch (err) {
      lastErr = err;
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error(`gateway did not come up: ${lastErr}`);
}

beforeAll(async () => {
  workdir = await mkdtemp(join(tmpdir(), "railmon-ui-"));
  await run("railmon", ["init", "--dir", "site"], { cwd: workdir });
  siteDir = join(workdir, "site");

  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const confPath = join(siteDir, "railmon.conf");
  const conf = readFileSync(confPath, "utf-8")
    .split("\n")
    .filter((line) => !line.trim().startsWith("listen_addr")
      && !line.trim().startsWith("ui_dist"))
    .join("\n");
  const uiDist = join(FRONTEND_DIR, "dist");
  if (!existsSync(join(uiDist, "index.html"))) {
    await run("node", ["build.mjs"], { cwd: FRONTEND_DIR });
  }
  writeFileSync(confPath,
    `${conf}\nlisten_addr = 127.0.0.1:${port}\nui_dist = ${uiDist}\n`);

  const principals = JSON.parse(readFileSync(
    join(siteDir, "principals.json"), "utf-8")) as
    { role: string; token: string }[];
  for (const p of principals) {
    if (!(p.role in tokens)) tokens[p.role] = p.token;
  }

  server = spawn("railmon", ["serve", "--config", "railmon.conf"],
    { cwd: siteDir, stdio: ["ignore", "pipe", "pipe"] });
  server.stderr?.on("data", () => undefined);
  adoptGatewayOrigin();
  await waitForGateway(new ApiClient(base, tokens["foreman"]));
});

afterAll(async () => {
  if (server && server.pid) {
    server.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 300));
  }
  await rm(workdir, { recursive: true, force: true });
});

beforeEach(() => {
  adoptGatewayOrigin();
  sessionStorage.clear();
  document.body.innerHTML = `<div id="app"></div>`;
});

function appRoot(): HTMLElement {
  return document.getElementById("app")!;
}

async function settle(times = 20): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((r) => setTimeout(r, 25));
    await flushAsync();
  }
}

describe("driver round trip", () => {
  it("form submission creates an EventLabel retrievable from the chain",
    async () => {
      sessionStorage.setItem("railmon.session", JSON.stringify({
        role: "driver", token: tokens["driver"], vehicleFilter: "" }));
      createApp(appRoot(), { base });
      await settle(4);

      const form = document.querySelector<HTMLElement>(".draft-form");
      expect(form).not.toBeNull();
      const set = (name: string, value: string) => {
        const input = form!.querySelector<HTMLInputElement>(
          `[name=${name}]`)!;
        input.value = value;
        input.dispatchEvent(new Event("input", { bubbles: true }));
      };
      const kind = form!.querySelector<HTMLSelectElement>(
        "select[name=event_kind]")!;
      kind.value = "track_bump";
      kind.dispatchEvent(new Event("change", { bubbles: true }));
      set("vehicle_id", "V42");
      set("time_start", "2026-08-14T06:10:00");
      set("time_end", "2026-08-14T06:12:30");
      const memo = form!.querySelector<HTMLTextAreaElement>(
        "textarea[name=memo_text]")!;
      memo.value = "hard knock at km 18";
      memo.dispatchEvent(new Event("input", { bubbles: true }));

      form!.dispatchEvent(new Event("submit", { bubbles: true,
        cancelable: true }));
      await settle();

      const item = document.querySelector<HTMLElement>("[data-label-id]");
      expect(item, "submitted list should show the new label").not.toBeNull();
      const labelId = item!.getAttribute("data-label-id")!;
      expect(labelId.length).toBeGreaterThan(0);

      // retrieve through the documented chain API as admin
      const admin = new ApiClient(base, tokens["admin"]);
      const head = await admin.chainHead();
      const records = await admin.chainRecords(0, head.length);
      const index = indexChain(records);
      const found = index.events.find((e) => e.label_id === labelId);
      expect(found, "label must be on the chain").toBeDefined();
      expect(found!.vehicle_id).toBe("V42");
      expect(found!.event_kind).toBe("track_bump");
      expect(found!.memo_text).toBe("hard knock at km 18");
    });
});

describe("server-side validation", () => {
  it("renders the gateway's own 422 against the offending field",
    async () => {
      const body = {
        event_kind: "track_bump", memo_text: "x",
        time_start: 2_000_000, time_end: 1_000_000, vehicle_id: "V42",
        gps_lat: null, gps_lon: null,
      };
      const driver = new ApiClient(base, tokens["driver"]);
      const err = await driver.postEventLabel(body)
        .catch((e) => e as ApiError);
      expect(err).toBeInstanceOf(ApiError);
      const apiErr = err as ApiError;
      expect(apiErr.status).toBe(422);
      expect(isFieldDetail(apiErr.detail)).toBe(true);
      const detail = apiErr.detail as { field: string; message: string };
      expect(detail).toEqual({
        field: "time_end", message: "time_end must be >= time_start" });

      // the client-side mirror produces the identical diagnosis
      expect(validateEventBody(body)).toEqual(detail);

      // and the form attaches exactly this payload inline
      sessionStorage.clear();
      document.body.innerHTML = `<div id="app"></div>`;
      sessionStorage.setItem("railmon.session", JSON.stringify({
        role: "driver", token: tokens["driver"], vehicleFilter: "" }));
      createApp(appRoot(), { base });
      await settle(4);
      const form = document.querySelector<HTMLElement>(".draft-form")!;
      setFieldError(form, detail.field, detail.message);
      const slot = form.querySelector(
        '[data-field="time_end"] .field-error')!;
      expect(slot.textContent).toBe("time_end must be >= time_start");
    });

  it("denies a driver the dashboard APIs with a readable message",
    async () => {
      const driver = new ApiClient(base, tokens["driver"]);
      const err = await driver.report().catch((e) => e as ApiError);
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(403);
      expect(String((err as ApiError).detail)).toContain("may not");
    });
});

describe("live dashboard", () => {
  it("shows verified chain state and the label count after ingest",
    async () => {
      const mech = new ApiClient(base, tokens["mechanic"]);
      await mech.postMaintenance({
        vehicle_id: "V42", phase: "entry",
        timestamp: 1_700_000_000_000_000, defects: [],
        work_performed: "", pass_ref: null,
      });

      sessionStorage.setItem("railmon.session", JSON.stringify({
        role: "foreman", token: tokens["foreman"], vehicleFilter: "" }));
      createApp(appRoot(), { base });
      await settle();

      const badge = document.querySelector(".chain-badge");
      expect(badge).not.toBeNull();
      expect(badge!.getAttribute("data-state")).toBe("verified");
      const labels = document.querySelector(
        '[data-counter="labels"] .counter-value');
      expect(Number(labels!.textContent)).toBeGreaterThanOrEqual(2);
      // foreman has no chain access: prepost panel explains itself
      const prepost = document.querySelector('[data-panel="prepost"]')!;
      expect(prepost.querySelector(".notice-denied")).not.toBeNull();
    });

  it("serves the built bundle at /ui/", async () => {
    const res = await fetch(`${base}/ui/`);
    expect(res.status).toBe(200);
    const html = await res.text();
    expect(html).toContain('<div id="app">');
    const js = await fetch(`${base}/ui/app.js`);
    expect(js.status).toBe(200);
  });
});
