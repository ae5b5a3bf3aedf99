// Cadre explorer: one panel per cadre (demographic bars plus mean +/- SD
// summaries) side by side, with per-cadre significance tables beneath.

import { ApiError, ServiceUnreachable } from "../api.js";
import { countBarsSvg, meanSdSvg } from "../charts.js";
import { esc, fmtCount, fmtMean, shortHash } from "../format.js";
import { findingsTableHtml } from "./results.js";
import type { AppContext, ViewHandle } from "../context.js";
import type { CadresPayload, CadreSummary } from "../types.js";

interface Scales {
  categoricalMax: Map<string, number>;
  continuousRange: Map<string, { lo: number; hi: number }>;
}

// Shared axes so the same variable is comparable across panels.
function computeScales(summaries: CadreSummary[]): Scales {
  const categoricalMax = new Map<string, number>();
  const continuousRange = new Map<string, { lo: number; hi: number }>();
  for (const s of summaries) {
    for (const [varName, counts] of Object.entries(s.categorical)) {
      for (const value of Object.values(counts)) {
        const prev = categoricalMax.get(varName) ?? 0;
        if (value > prev) categoricalMax.set(varName, value);
      }
    }
    for (const [varName, stat] of Object.entries(s.continuous)) {
      const lo = stat.mean - stat.sd;
      const hi = stat.mean + stat.sd;
      const prev = continuousRange.get(varName);
      if (!prev) {
        continuousRange.set(varName, { lo, hi });
      } else {
        if (lo < prev.lo) prev.lo = lo;
        if (hi > prev.hi) prev.hi = hi;
      }
    }
  }
  return { categoricalMax, continuousRange };
}

function panelHtml(summary: CadreSummary, scales: Scales): string {
  const head = `
    <h3>Cadre ${summary.cadre}</h3>
    <p class="cadre-count" data-count="${summary.count}">
      ${fmtCount(summary.count)} members (weighted ${fmtCount(summary.weighted_count)})
    </p>`;
  if (summary.count === 0) {
    return `<div class="cadre-panel cadre-empty" data-cadre="${summary.cadre}">
      ${head}
      <p class="empty-state">0 members, untestable</p>
    </div>`;
  }
  const demographics = Object.entries(summary.categorical)
    .map(
      ([varName, counts]) => `
      <div class="demo-block" data-var="${esc(varName)}">
        <h4>${esc(varName)}</h4>
        ${countBarsSvg(counts, scales.categoricalMax.get(varName) ?? 0)}
      </div>`,
    )
    .join("");
  const variables = Object.entries(summary.continuous)
    .map(([varName, stat]) => {
      const range = scales.continuousRange.get(varName) ?? { lo: 0, hi: 1 };
      return `
      <div class="var-row" data-var="${esc(varName)}">
        <span class="var-name">${esc(varName)}</span>
        <span class="var-stat" data-mean="${stat.mean}" data-sd="${stat.sd}">
          ${fmtMean(stat.mean)} &plusmn; ${fmtMean(stat.sd)} (n=${stat.n})
        </span>
        ${meanSdSvg(stat.mean, stat.sd, range.lo, range.hi)}
      </div>`;
    })
    .join("");
  return `<div class="cadre-panel" data-cadre="${summary.cadre}">
    ${head}
    <div class="demographics"><h4 class="block-title">Demographics</h4>${demographics}</div>
    <div class="variables"><h4 class="block-title">Variables (mean &plusmn; SD)</h4>${variables}</div>
  </div>`;
}

export function cadrePanelsHtml(payload: CadresPayload, alpha: number): string {
  const scales = computeScales(payload.summaries);
  const panels = payload.summaries.map((s) => panelHtml(s, scales)).join("");
  const tables = payload.per_cadre
    .map((scan) => {
      if (!scan.testable) {
        return `<div class="cadre-table" data-cadre="${scan.cadre}">
          <h3>Cadre ${scan.cadre} associations</h3>
          <p class="empty-state">${esc(scan.reason || "untestable")}</p>
        </div>`;
      }
      const skipped =
        scan.skipped.length > 0
          ? `<ul class="skipped-inline">${scan.skipped
              .map((s) => `<li>${esc(s.factor_id)}: ${esc(s.reason)}</li>`)
              .join("")}</ul>`
          : "";
      return `<div class="cadre-table" data-cadre="${scan.cadre}">
        <h3>Cadre ${scan.cadre} associations</h3>
        ${findingsTableHtml(scan.results, alpha, "adjusted_p", "asc")}
        ${skipped}
      </div>`;
    })
    .join("");
  return `
    <div class="cadre-panels" data-role="panels" data-n-cadres="${payload.summaries.length}">${panels}</div>
    <div class="cadre-tables" data-role="tables">${tables}</div>`;
}

export async function renderCadres(
  el: HTMLElement,
  ctx: AppContext,
  resultId: string,
): Promise<ViewHandle> {
  el.innerHTML = `<p class="loading">Loading cadres...</p>`;

  let payload: CadresPayload;
  let alpha = 0.05;
  try {
    const doc = await ctx.api.getResult(resultId);
    alpha = doc.alpha;
    payload = await ctx.api.getCadres(resultId);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      el.innerHTML = `
        <section class="cadres" data-role="no-cadres">
          <h2>No cadres for this result</h2>
          <p>This result came from a single-model association scan, which fits one model to the whole cohort and does not partition it. Run the study with a cadre-model workflow to explore subpopulations.</p>
          <p><a href="#/results/${esc(resultId)}">Back to the result</a></p>
        </section>`;
      return {};
    }
    if (err instanceof ApiError && err.status === 404) {
      el.innerHTML = `
        <section class="not-found" data-role="not-found">
          <h2>Result not found</h2>
          <p>No recorded result has id <code>${esc(shortHash(resultId))}</code>.</p>
          <p><a href="#/designer">Back to the designer</a></p>
        </section>`;
      return {};
    }
    if (err instanceof ServiceUnreachable) {
      el.innerHTML = `<div class="banner banner-error"><p>The study service is unreachable.</p></div>`;
      return {};
    }
    throw err;
  }

  el.innerHTML = `
    <section class="cadres" data-result-id="${esc(payload.result_id)}">
      <h2>Cadre explorer</h2>
      <p class="result-meta">result <code>${esc(shortHash(payload.result_id))}</code>,
        ${payload.summaries.length} cadre${payload.summaries.length === 1 ? "" : "s"}
        <a href="#/results/${esc(resultId)}">back to result</a></p>
      ${cadrePanelsHtml(payload, alpha)}
    </section>`;
  return {};
}
