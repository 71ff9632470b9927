/** Post-shift event labeling.
 *
 * Drivers file a batch of draft events from their shift memos. Drafts live
 * in sessionStorage until each one is accepted by the gateway, so neither
 * a network drop nor an expired token loses work. Client-side validation
 * mirrors the API rules and rejected fields are flagged inline either way.
 */

import { ApiError, AuthError, isFieldDetail, NetworkError } from "../api.js";
import { clear, clearFieldErrors, fieldRow, h, setFieldError, showNotice }
  from "../dom.js";
import type { EventDraft } from "../session.js";
import { emptyEventDraft, loadDrafts, saveDrafts } from "../session.js";
import type { EventLabelBody, EventLabelResponse } from "../types.js";
import { EVENT_KINDS } from "../types.js";
import { localTimeToMicros } from "../validate.js";
import { validateEventBody } from "../validate.js";
import type { ViewContext } from "./context.js";

export function draftToBody(draft: EventDraft): EventLabelBody {
  const parseAxis = (raw: string): number | null =>
    raw.trim() === "" ? null : Number(raw);
  return {
    event_kind: draft.event_kind || null,
    memo_text: draft.memo_text,
    time_start: localTimeToMicros(draft.start_local),
    time_end: localTimeToMicros(draft.end_local),
    vehicle_id: draft.vehicle_id,
    gps_lat: parseAxis(draft.gps_lat),
    gps_lon: parseAxis(draft.gps_lon),
  };
}

/** Horizontal strip showing each draft as a time-positioned segment. */
export function renderTimeline(drafts: EventDraft[]): HTMLElement {
  const strip = h("div", { class: "timeline" });
  const timed = drafts
    .map((draft, index) => ({
      index,
      kind: draft.event_kind,
      start: localTimeToMicros(draft.start_local),
      end: localTimeToMicros(draft.end_local),
    }))
    .filter((d): d is typeof d & { start: number; end: number } =>
      d.start !== null && d.end !== null && d.end >= d.start);
  if (!timed.length) {
    strip.append(h("span", { class: "timeline-empty" },
      "segments appear here once drafts have times"));
    return strip;
  }
  const lo = Math.min(...timed.map((d) => d.start));
  const hi = Math.max(...timed.map((d) => d.end));
  const span = Math.max(hi - lo, 1);
  for (const d of timed) {
    const left = ((d.start - lo) / span) * 100;
    const width = Math.max(((d.end - d.start) / span) * 100, 1.5);
    strip.append(h("div", {
      class: `timeline-bar kind-${d.kind}`,
      "data-draft": d.index,
      style: `left:${left.toFixed(2)}%;width:${width.toFixed(2)}%`,
      title: `draft ${d.index + 1}: ${d.kind}`,
    }));
  }
  return strip;
}

export function renderEvents(root: HTMLElement, ctx: ViewContext): void {
  let drafts = loadDrafts();
  if (!drafts.length) drafts = [emptyEventDraft()];
  const submitted: EventLabelResponse[] = [];

  const view = h("section", { class: "events-view" });
  const timelineSlot = h("div", { class: "timeline-slot" });
  const draftsSlot = h("div", { class: "drafts" });
  const submittedSlot = h("div", { class: "submitted" });

  const persist = () => saveDrafts(drafts);

  const refreshTimeline = () => {
    clear(timelineSlot);
    timelineSlot.append(renderTimeline(drafts));
  };

  const refreshSubmitted = () => {
    clear(submittedSlot);
    if (!submitted.length) return;
    submittedSlot.append(h("h3", {}, "Submitted this session"));
    const list = h("ul", { class: "submitted-list" });
    for (const label of submitted) {
      list.append(h("li", { "data-label-id": label.label_id },
        h("code", {}, label.label_id),
        ` ${label.event_kind} on ${label.vehicle_id}`));
    }
    submittedSlot.append(list);
  };

  const submitDraft = async (index: number, form: HTMLElement) => {
    clearFieldErrors(form);
    const body = draftToBody(drafts[index]);
    const local = validateEventBody(body);
    if (local) {
      // mirror of the API rules; nothing goes over the wire
      setFieldError(form, local.field, local.message);
      return;
    }
    try {
      const created = await ctx.client.postEventLabel(body);
      submitted.unshift(created);
      drafts.splice(index, 1);
      persist();
      refreshDrafts();
      refreshTimeline();
      refreshSubmitted();
    } catch (err) {
      if (err instanceof AuthError) {
        persist();
        ctx.onAuthExpired("session expired, your drafts were preserved");
        return;
      }
      if (err instanceof NetworkError) {
        showNotice(form, "error", "could not reach the gateway",
          () => void submitDraft(index, form));
        return;
      }
      if (err instanceof ApiError) {
        if (isFieldDetail(err.detail)) {
          setFieldError(form, err.detail.field, err.detail.message);
        } else {
          showNotice(form, "error", String(err.detail));
        }
        return;
      }
      throw err;
    }
  };

  const draftForm = (draft: EventDraft, index: number): HTMLElement => {
    const bind = <E extends HTMLElement>(el: E,
                                         apply: (value: string) => void): E => {
      const handler = (ev: Event) => {
        apply((ev.target as HTMLInputElement).value);
        persist();
        refreshTimeline();
      };
      el.addEventListener("input", handler);
      el.addEventListener("change", handler);
      return el;
    };

    const kindSelect = h("select", { name: "event_kind" }) as HTMLSelectElement;
    for (const kind of EVENT_KINDS) {
      kindSelect.append(h("option", { value: kind }, kind));
    }
    kindSelect.value = draft.event_kind;
    bind(kindSelect, (v) => { draft.event_kind = v; });

    const vehicle = bind(h("input", {
      type: "text", name: "vehicle_id", value: draft.vehicle_id,
      placeholder: "V12",
    }) as HTMLInputElement, (v) => { draft.vehicle_id = v; });
    const start = bind(h("input", {
      type: "datetime-local", name: "time_start", value: draft.start_local,
      step: "1",
    }) as HTMLInputElement, (v) => { draft.start_local = v; });
    const end = bind(h("input", {
      type: "datetime-local", name: "time_end", value: draft.end_local,
      step: "1",
    }) as HTMLInputElement, (v) => { draft.end_local = v; });
    const memo = bind(h("textarea", {
      name: "memo_text", rows: 2,
      placeholder: "what happened on this segment",
    }) as HTMLTextAreaElement, (v) => { draft.memo_text = v; });
    memo.value = draft.memo_text;
    const lat = bind(h("input", {
      type: "text", name: "gps_lat", value: draft.gps_lat, placeholder: "lat",
    }) as HTMLInputElement, (v) => { draft.gps_lat = v; });
    const lon = bind(h("input", {
      type: "text", name: "gps_lon", value: draft.gps_lon, placeholder: "lon",
    }) as HTMLInputElement, (v) => { draft.gps_lon = v; });

    const form = h("form", { class: "draft-form", "data-draft": index },
      h("div", { class: "draft-head" },
        h("span", { class: "draft-title" }, `Event ${index + 1}`),
        h("button", {
          type: "button", class: "remove",
          onclick: () => {
            drafts.splice(index, 1);
            persist();
            refreshDrafts();
            refreshTimeline();
          },
        }, "Remove")),
      fieldRow("event_kind", "Kind", kindSelect),
      fieldRow("vehicle_id", "Vehicle", vehicle),
      fieldRow("time_start", "Start", start),
      fieldRow("time_end", "End", end),
      fieldRow("memo_text", "Memo", memo),
      h("div", { class: "gps-pair" },
        fieldRow("gps_lat", "GPS lat", lat),
        fieldRow("gps_lon", "GPS lon", lon)),
      h("button", { type: "submit" }, "Submit event"));
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void submitDraft(index, form);
    });
    return form;
  };

  const refreshDrafts = () => {
    clear(draftsSlot);
    drafts.forEach((draft, index) => {
      draftsSlot.append(draftForm(draft, index));
    });
  };

  refreshDrafts();
  refreshTimeline();
  refreshSubmitted();

  view.append(
    h("h2", {}, "Shift events"),
    timelineSlot,
    draftsSlot,
    h("button", {
      type: "button", class: "add-draft",
      onclick: () => {
        drafts.push(emptyEventDraft());
        saveDrafts(drafts);
        refreshDrafts();
        refreshTimeline();
      },
    }, "Add event"),
    submittedSlot);
  root.append(view);
}
