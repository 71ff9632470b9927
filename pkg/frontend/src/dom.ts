/** Small DOM helpers: element construction, field rows with attached error
 * slots, and the global notice banners the error contract relies on. */

type Child = Node | string | null | undefined;

export interface Attrs {
  [name: string]: string | number | boolean | EventListener | undefined;
}

export function h(tag: string, attrs: Attrs = {},
                  ...children: Child[]): HTMLElement {
  const el = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    if (value === undefined || value === false) continue;
    if (name.startsWith("on") && typeof value === "function") {
      el.addEventListener(name.slice(2), value);
    } else if (value === true) {
      el.setAttribute(name, "");
    } else {
      el.setAttribute(name, String(value));
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    el.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return el;
}

export function clear(el: HTMLElement): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

/** A labeled input row carrying data-field so errors can find their home. */
export function fieldRow(field: string, labelText: string,
                         control: HTMLElement): HTMLElement {
  return h("div", { class: "field", "data-field": field },
    h("label", {}, labelText),
    control,
    h("div", { class: "field-error", role: "alert" }));
}

/** Attach a validation message to its field; falls back to a form notice
 * when no matching row exists, so nothing is ever dropped silently. */
export function setFieldError(root: HTMLElement, field: string,
                              message: string): void {
  const row = root.querySelector<HTMLElement>(
    `[data-field="${field}"] .field-error`);
  if (row) {
    row.textContent = message;
    row.closest(".field")?.classList.add("invalid");
  } else {
    showNotice(root, "error", `${field}: ${message}`);
  }
}

export function clearFieldErrors(root: HTMLElement): void {
  for (const el of root.querySelectorAll<HTMLElement>(".field-error")) {
    el.textContent = "";
  }
  for (const el of root.querySelectorAll<HTMLElement>(".field.invalid")) {
    el.classList.remove("invalid");
  }
  root.querySelector(".notice")?.remove();
}

/** Global notice banner; kind is one of error | warn | info. */
export function showNotice(root: HTMLElement, kind: string, text: string,
                           onRetry?: () => void): HTMLElement {
  root.querySelector(".notice")?.remove();
  const banner = h("div", { class: `notice notice-${kind}`, role: "status" },
    h("span", {}, text));
  if (onRetry) {
    banner.append(h("button", {
      type: "button", class: "retry", onclick: () => onRetry(),
    }, "Retry"));
  }
  root.prepend(banner);
  return banner;
}

export function permissionsNotice(detail: string): HTMLElement {
  return h("div", { class: "notice notice-denied", role: "status" },
    `Not available for this session: ${detail}`);
}
