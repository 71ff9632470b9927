/** Band-ratio bar chart, plain DOM so tests can read the bars directly.
 *
 * Ratios are multiplicative around 1.0, so bars scale with log2(ratio):
 * a doubled band rises as far as a halved band drops.
 */

import { h } from "./dom.js";

const MAX_LOG2 = 5;
const HALF_HEIGHT_PX = 60;

function formatRatio(ratio: number): string {
  if (!Number.isFinite(ratio)) return "inf";
  if (ratio >= 100) return ratio.toFixed(0);
  return Number(ratio.toPrecision(3)).toString();
}

export function bandRatioChart(ratios: number[]): HTMLElement {
  const chart = h("div", { class: "band-chart", role: "img" });
  ratios.forEach((ratio, band) => {
    const log = Math.log2(Math.max(ratio, Number.MIN_VALUE));
    const clamped = Math.max(-MAX_LOG2, Math.min(MAX_LOG2, log));
    const px = Math.round(Math.abs(clamped) / MAX_LOG2 * HALF_HEIGHT_PX);
    const bar = h("div", {
      class: "band-bar" + (clamped >= 0 ? " up" : " down"),
      "data-band": band,
      "data-ratio": String(ratio),
      style: `height:${Math.max(px, 2)}px`,
      title: `band ${band}: x${formatRatio(ratio)}`,
    });
    chart.append(h("div", { class: "band-col" },
      h("div", { class: "band-value" }, formatRatio(ratio)),
      h("div", { class: clamped >= 0 ? "band-slot up" : "band-slot down" },
        bar),
      h("div", { class: "band-label" }, `b${band}`)));
  });
  return chart;
}
