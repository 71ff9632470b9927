/** Workshop entry/exit documentation.
 *
 * One form per record: the mechanic notes the vehicle state going in
 * (defects found) and coming out (work performed). Defect rows carry
 * data-field="defects[i]" so a rejected row is flagged in place.
 */

import { ApiError, AuthError, isFieldDetail, NetworkError } from "../api.js";
import { clear, clearFieldErrors, fieldRow, h, setFieldError, showNotice }
  from "../dom.js";
import type { DefectBody, MaintenanceBody, MaintenanceResponse }
  from "../types.js";
import { DEFECT_SEVERITIES, MAINTENANCE_PHASES } from "../types.js";
import { localTimeToMicros, validateMaintenanceBody } from "../validate.js";
import type { ViewContext } from "./context.js";

interface MaintenanceDraft {
  vehicle_id: string;
  phase: string;
  timestamp_local: string;
  work_performed: string;
  pass_ref: string;
  defects: DefectBody[];
}

function emptyDraft(): MaintenanceDraft {
  return { vehicle_id: "", phase: "entry", timestamp_local: "",
           work_performed: "", pass_ref: "", defects: [] };
}

export function draftToMaintenanceBody(draft: MaintenanceDraft
                                       ): MaintenanceBody {
  return {
    vehicle_id: draft.vehicle_id,
    phase: draft.phase || null,
    timestamp: localTimeToMicros(draft.timestamp_local),
    defects: draft.defects.map((d) => ({ ...d })),
    work_performed: draft.work_performed,
    pass_ref: draft.pass_ref.trim() === "" ? null : draft.pass_ref.trim(),
  };
}

export function renderMaintenance(root: HTMLElement, ctx: ViewContext): void {
  const draft = emptyDraft();
  const submitted: MaintenanceResponse[] = [];

  const view = h("section", { class: "maintenance-view" });
  const formSlot = h("div", { class: "maintenance-form-slot" });
  const submittedSlot = h("div", { class: "submitted" });

  const refreshSubmitted = () => {
    clear(submittedSlot);
    if (!submitted.length) return;
    submittedSlot.append(h("h3", {}, "Recorded this session"));
    const list = h("ul", { class: "submitted-list" });
    for (const record of submitted) {
      list.append(h("li", { "data-record-id": record.record_id },
        h("code", {}, record.record_id),
        ` ${record.phase} for ${record.vehicle_id},`
        + ` ${record.defects.length} defect(s)`));
    }
    submittedSlot.append(list);
  };

  const submit = async (form: HTMLElement) => {
    clearFieldErrors(form);
    const body = draftToMaintenanceBody(draft);
    const local = validateMaintenanceBody(body);
    if (local) {
      setFieldError(form, local.field, local.message);
      return;
    }
    try {
      const created = await ctx.client.postMaintenance(body);
      submitted.unshift(created);
      Object.assign(draft, emptyDraft());
      refreshForm();
      refreshSubmitted();
    } catch (err) {
      if (err instanceof AuthError) {
        ctx.onAuthExpired("session expired, please reconnect");
        return;
      }
      if (err instanceof NetworkError) {
        showNotice(form, "error", "could not reach the gateway",
          () => void submit(form));
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

  const defectRow = (defect: DefectBody, index: number,
                     refresh: () => void): HTMLElement => {
    const textInput = (name: keyof DefectBody, placeholder: string) => {
      const input = h("input", {
        type: "text", value: defect[name], placeholder,
      }) as HTMLInputElement;
      input.addEventListener("input", () => { defect[name] = input.value; });
      return input;
    };
    const severity = h("select", {}) as HTMLSelectElement;
    for (const level of DEFECT_SEVERITIES) {
      severity.append(h("option", { value: level }, level));
    }
    severity.value = defect.severity;
    severity.addEventListener("change", () => {
      defect.severity = severity.value;
    });
    return h("div", { class: "field defect-row",
                      "data-field": `defects[${index}]` },
      textInput("component", "component"),
      textInput("defect_kind", "defect kind"),
      severity,
      h("button", {
        type: "button", class: "remove",
        onclick: () => { draft.defects.splice(index, 1); refresh(); },
      }, "Remove"),
      h("div", { class: "field-error", role: "alert" }));
  };

  const buildForm = (): HTMLElement => {
    const vehicle = h("input", {
      type: "text", name: "vehicle_id", value: draft.vehicle_id,
      placeholder: "V12",
    }) as HTMLInputElement;
    vehicle.addEventListener("input", () => {
      draft.vehicle_id = vehicle.value;
    });

    const phase = h("select", { name: "phase" }) as HTMLSelectElement;
    for (const p of MAINTENANCE_PHASES) {
      phase.append(h("option", { value: p }, p));
    }
    phase.value = draft.phase;
    phase.addEventListener("change", () => { draft.phase = phase.value; });

    const when = h("input", {
      type: "datetime-local", name: "timestamp", step: "1",
      value: draft.timestamp_local,
    }) as HTMLInputElement;
    when.addEventListener("input", () => {
      draft.timestamp_local = when.value;
    });

    const work = h("textarea", {
      name: "work_performed", rows: 2,
      placeholder: "work performed (required on exit when defects exist)",
    }) as HTMLTextAreaElement;
    work.value = draft.work_performed;
    work.addEventListener("input", () => {
      draft.work_performed = work.value;
    });

    const passRef = h("input", {
      type: "text", name: "pass_ref", value: draft.pass_ref,
      placeholder: "track pass reference (optional)",
    }) as HTMLInputElement;
    passRef.addEventListener("input", () => {
      draft.pass_ref = passRef.value;
    });

    const defectsSlot = h("div", { class: "defects" });
    const refreshDefects = () => {
      clear(defectsSlot);
      draft.defects.forEach((defect, index) => {
        defectsSlot.append(defectRow(defect, index, refreshDefects));
      });
    };
    refreshDefects();

    const form = h("form", { class: "maintenance-form" },
      fieldRow("vehicle_id", "Vehicle", vehicle),
      fieldRow("phase", "Phase", phase),
      fieldRow("timestamp", "Time", when),
      h("div", { class: "defects-head" },
        h("span", {}, "Defects"),
        h("button", {
          type: "button", class: "add-defect",
          onclick: () => {
            draft.defects.push({ component: "", defect_kind: "",
                                 severity: "minor" });
            refreshDefects();
          },
        }, "Add defect")),
      defectsSlot,
      fieldRow("work_performed", "Work performed", work),
      fieldRow("pass_ref", "Pass ref", passRef),
      h("button", { type: "submit" }, "Record"));
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void submit(form);
    });
    return form;
  };

  const refreshForm = () => {
    clear(formSlot);
    formSlot.append(buildForm());
  };
  refreshForm();

  view.append(h("h2", {}, "Workshop records"), formSlot, submittedSlot);
  root.append(view);
}
