/** Foreman / partner / admin dashboard.
 *
 * Each panel loads independently and degrades independently: a denied
 * API call renders a permissions notice in that panel, a network failure
 * renders a retry banner, and the rest of the dashboard stays usable.
 */

import type { ApiClient } from "../api.js";
import { ApiError, AuthError, NetworkError } from "../api.js";
import { bandRatioChart } from "../chart.js";
import { clear, h, permissionsNotice, showNotice } from "../dom.js";
import type { ChainIndex, PairComparison } from "../spectral.js";
import { comparePairs, indexChain, refKey } from "../spectral.js";
import { saveSession } from "../session.js";
import type {
  AuditEntry, FrameRef, FrameWire, HealthResponse, RecommendationItem,
  ReportResponse,
} from "../types.js";
import { microsToDate } from "../validate.js";
import type { ViewContext } from "./context.js";

const CHAIN_PAGE = 500;

// -- pure renderers, driven by fixtures in tests -----------------------------

export function renderHealth(health: HealthResponse): HTMLElement {
  const ok = health.last_verify.ok;
  const badge = h("span", {
    class: `chain-badge ${ok ? "verified" : "tamper"}`,
    "data-state": ok ? "verified" : "tamper",
  }, ok ? "CHAIN VERIFIED" : "TAMPER SUSPECTED");
  const counters = h("div", { class: "counters" });
  const counter = (name: string, value: number) =>
    h("div", { class: "counter", "data-counter": name },
      h("span", { class: "counter-value" }, String(value)),
      h("span", { class: "counter-name" }, name));
  counters.append(
    counter("frames", health.frames),
    counter("labels", health.labels),
    counter("recommendations", health.recommendations),
    counter("chain records", health.chain_length));
  const detail = ok ? null : h("div", { class: "tamper-detail" },
    `verification failed at record ${health.last_verify.first_bad_seq}`
    + ` (${health.last_verify.reason})`);
  return h("div", { class: "health" }, badge, counters, detail);
}

export type EvidenceResolver = (ref: FrameRef) => FrameWire | null;

export function renderRecommendationRows(
  recs: RecommendationItem[], resolve?: EvidenceResolver): HTMLElement {
  const sorted = recs.slice().sort((a, b) => b.created_at - a.created_at);
  const list = h("div", { class: "rec-list" });
  if (!sorted.length) {
    list.append(h("p", { class: "empty" }, "no open recommendations"));
    return list;
  }
  for (const rec of sorted) {
    const evidence = h("ul", { class: "evidence", hidden: true });
    for (const ref of rec.evidence) {
      const item = h("li", {}, h("code", {}, refKey(ref)));
      const frame = resolve?.(ref) ?? null;
      if (frame) {
        item.append(` sensor ${frame.sensor_id}, window ${frame.window_len}`
          + ` @ ${microsToDate(frame.start_timestamp)}`);
      }
      evidence.append(item);
    }
    const row = h("div", { class: "rec-row", "data-rec-id": rec.rec_id },
      h("div", { class: "rec-line" },
        h("span", { class: "rec-subject" }, rec.subject),
        h("span", { class: "rec-issue" }, rec.predicted_issue),
        h("span", { class: "rec-confidence" },
          `${(rec.confidence * 100).toFixed(1)}%`),
        h("button", {
          type: "button", class: "rec-evidence-toggle",
          onclick: () => { evidence.hidden = !evidence.hidden; },
        }, `evidence (${rec.evidence.length})`),
        h("span", { class: "rec-created" }, microsToDate(rec.created_at))),
      evidence);
    list.append(row);
  }
  return list;
}

export function renderReportStats(report: ReportResponse): HTMLElement {
  const labels = h("ul", { class: "label-counts" });
  for (const [kind, count] of Object.entries(report.label_counts).sort()) {
    labels.append(h("li", { "data-kind": kind }, `${kind}: ${count}`));
  }
  return h("div", { class: "report-stats" },
    h("p", {}, `frames ingested: ${report.frame_count}`),
    h("p", { class: "anomaly-alarms" },
      `anomaly alarms (recent frames): ${report.anomaly_alarms_last_n}`),
    labels);
}

export function renderPairComparisons(pairs: PairComparison[]): HTMLElement {
  const wrap = h("div", { class: "prepost" });
  const completed = pairs.filter((p) => p.result !== null);
  if (!completed.length) {
    wrap.append(h("p", { class: "empty" },
      "no completed maintenance pairs with frames on both sides"));
    return wrap;
  }
  for (const pair of completed) {
    wrap.append(h("div", { class: "pair", "data-vehicle": pair.vehicleId },
      h("h4", {}, `${pair.vehicleId}: `
        + `${microsToDate(pair.entry.timestamp)} to `
        + microsToDate(pair.exit.timestamp)),
      h("p", { class: "pair-meta" },
        `${pair.preCount} frames before, ${pair.postCount} after, `
        + `delta score ${pair.result!.deltaScore.toFixed(3)}`),
      bandRatioChart(pair.result!.bandRatio)));
  }
  return wrap;
}

export function renderAuditTable(entries: AuditEntry[]): HTMLElement {
  const table = h("table", { class: "audit-table" },
    h("thead", {}, h("tr", {},
      h("th", {}, "seq"), h("th", {}, "time"), h("th", {}, "principal"),
      h("th", {}, "request"), h("th", {}, "outcome"), h("th", {}, "detail"))));
  const body = h("tbody", {});
  for (const entry of entries.slice().reverse()) {
    body.append(h("tr", { "data-outcome": entry.outcome },
      h("td", {}, String(entry.seq)),
      h("td", {}, microsToDate(entry.timestamp)),
      h("td", {}, entry.principal_id),
      h("td", {}, entry.request),
      h("td", {}, entry.outcome),
      h("td", {}, entry.detail)));
  }
  table.append(body);
  return table;
}

// -- orchestration -------------------------------------------------------------

async function loadChainIndex(client: ApiClient): Promise<ChainIndex> {
  const head = await client.chainHead();
  const records = [];
  for (let from = 0; from < head.length; from += CHAIN_PAGE) {
    const page = await client.chainRecords(
      from, Math.min(from + CHAIN_PAGE, head.length));
    records.push(...page);
  }
  return indexChain(records);
}

type PanelLoader = () => Promise<HTMLElement>;

interface Panel {
  el: HTMLElement;
  reload: () => void;
}

export function renderDashboard(root: HTMLElement, ctx: ViewContext): void {
  const view = h("section", { class: "dashboard-view" });

  const makePanel = (name: string, title: string,
                     load: PanelLoader): Panel => {
    const content = h("div", { class: "panel-content" }, "loading...");
    const run = () => {
      void (async () => {
        try {
          const el = await load();
          clear(content);
          content.append(el);
        } catch (err) {
          if (err instanceof AuthError) {
            ctx.onAuthExpired("session expired");
            return;
          }
          clear(content);
          if (err instanceof ApiError && err.status === 403) {
            content.append(permissionsNotice(String(err.detail)));
          } else if (err instanceof NetworkError) {
            showNotice(content, "error", "could not reach the gateway", run);
          } else {
            showNotice(content, "error", String(err));
          }
        }
      })();
    };
    run();
    const el = h("div", { class: "panel", "data-panel": name },
      h("h3", {}, title), content);
    return { el, reload: run };
  };

  // chain data backs both evidence resolution and the pre/post charts;
  // foreman tokens get a permissions notice here and full panels elsewhere
  const chainPromise: Promise<ChainIndex | null> =
    loadChainIndex(ctx.client).catch((err) => {
      if (err instanceof ApiError && err.status === 403) return null;
      throw err;
    });

  const health = makePanel("health", "System health",
    async () => renderHealth(await ctx.client.health()));

  const recs = makePanel("recommendations", "Recommendations", async () => {
    const subject = ctx.session.vehicleFilter.trim();
    const items = await ctx.client.recommendations(subject || undefined);
    const index = await chainPromise.catch(() => null);
    const resolver = index
      ? (ref: FrameRef) => {
        const payload = index.byRef.get(refKey(ref));
        return payload ? payload as FrameWire : null;
      }
      : undefined;
    const filter = h("input", {
      type: "text", class: "subject-filter", value: subject,
      placeholder: "filter by vehicle id",
    }) as HTMLInputElement;
    const apply = h("button", { type: "button", class: "apply-filter" },
      "Apply");
    apply.addEventListener("click", () => {
      ctx.session.vehicleFilter = filter.value;
      saveSession(ctx.session);
      recs.reload();
    });
    return h("div", {},
      h("div", { class: "filter-row" }, filter, apply),
      renderRecommendationRows(items, resolver));
  });

  const report = makePanel("report", "Operations report",
    async () => renderReportStats(await ctx.client.report()));

  const prepost = makePanel("prepost", "Pre/post maintenance comparison",
    async () => {
      const index = await chainPromise;
      if (index === null) {
        return permissionsNotice("chain access requires a partner"
          + " or admin token");
      }
      return renderPairComparisons(comparePairs(index));
    });

  view.append(health.el, recs.el, report.el, prepost.el);
  if (ctx.session.role === "admin") {
    view.append(makePanel("audit", "Audit log",
      async () => renderAuditTable(await ctx.client.audit())).el);
  }

  root.append(view);
}
