// Result view: sortable findings table with significant rows highlighted,
// the provenance chain, and a refine button that clones the study into a
// fresh draft.

import { ApiError, ServiceUnreachable } from "../api.js";
import { esc, fmtCoef, fmtP, shortHash, stars } from "../format.js";
import { draftFromProvenance } from "../state.js";
import type { AppContext, ViewHandle } from "../context.js";
import type { Finding, ProvenanceChain, ResultDoc } from "../types.js";

type SortKey =
  | "factor_id"
  | "coefficient"
  | "robust_se"
  | "p_value"
  | "adjusted_p"
  | "n_used";

const COLUMNS: { key: SortKey; label: string }[] = [
  { key: "factor_id", label: "factor" },
  { key: "coefficient", label: "coefficient" },
  { key: "robust_se", label: "robust SE" },
  { key: "p_value", label: "p" },
  { key: "adjusted_p", label: "q" },
  { key: "n_used", label: "n" },
];

/** Deterministic order: chosen column, then factor id breaks ties. */
export function sortFindings(
  findings: Finding[],
  key: SortKey,
  dir: "asc" | "desc",
): Finding[] {
  const sign = dir === "asc" ? 1 : -1;
  return [...findings].sort((a, b) => {
    const va = a[key];
    const vb = b[key];
    let cmp = 0;
    if (typeof va === "number" && typeof vb === "number") {
      cmp = va < vb ? -1 : va > vb ? 1 : 0;
    } else {
      cmp = String(va) < String(vb) ? -1 : String(va) > String(vb) ? 1 : 0;
    }
    if (cmp !== 0) return cmp * sign;
    return a.factor_id < b.factor_id ? -1 : a.factor_id > b.factor_id ? 1 : 0;
  });
}

export function findingsTableHtml(
  findings: Finding[],
  alpha: number,
  key: SortKey,
  dir: "asc" | "desc",
): string {
  const ordered = sortFindings(findings, key, dir);
  const head = COLUMNS.map((c) => {
    const marker = c.key === key ? (dir === "asc" ? " \u25b2" : " \u25bc") : "";
    return `<th data-sort="${c.key}" role="button">${esc(c.label)}${marker}</th>`;
  }).join("");
  const rows = ordered
    .map((f) => {
      const cls = f.significant ? ' class="sig"' : "";
      return `<tr${cls} data-factor="${esc(f.factor_id)}" data-significant="${f.significant}">
        <td>${esc(f.factor_id)}</td>
        <td>${fmtCoef(f.coefficient)}</td>
        <td>${fmtCoef(f.robust_se)}</td>
        <td>${fmtP(f.p_value)}</td>
        <td>${fmtP(f.adjusted_p)} ${stars(f.adjusted_p, alpha)}</td>
        <td>${f.n_used}</td>
      </tr>`;
    })
    .join("");
  return `<table class="findings">
    <thead><tr>${head}</tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function provenancePanelHtml(chain: ProvenanceChain): string {
  const rows = chain.entries
    .map(
      (e) => `<li data-kind="${esc(e.kind)}" data-resolved="${e.resolved}">
        <span class="prov-kind">${esc(e.kind)}</span>
        <span class="prov-id">${esc(e.id)}</span>
        <code class="prov-hash">${esc(shortHash(e.hash))}</code>
        <span class="prov-state">${e.resolved ? "resolved" : "unresolved"}</span>
      </li>`,
    )
    .join("");
  return `<div class="provenance" data-role="provenance">
    <h3>Provenance</h3>
    <ul>${rows}</ul>
    <p class="fingerprint">dataset <code>${esc(shortHash(chain.dataset_fingerprint))}</code></p>
  </div>`;
}

export async function renderResult(
  el: HTMLElement,
  ctx: AppContext,
  resultId: string,
): Promise<ViewHandle> {
  el.innerHTML = `<p class="loading">Loading result...</p>`;

  let doc: ResultDoc;
  let chain: ProvenanceChain;
  try {
    [doc, chain] = await Promise.all([
      ctx.api.getResult(resultId),
      ctx.api.getProvenance(resultId),
    ]);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      el.innerHTML = `
        <section class="not-found" data-role="not-found">
          <h2>Result not found</h2>
          <p>No recorded result has id <code>${esc(shortHash(resultId))}</code>. It may not have finished, or the store may have been rebuilt.</p>
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

  let sortKey: SortKey = "adjusted_p";
  let sortDir: "asc" | "desc" = "asc";

  const scmNote =
    doc.findings.length === 0 && doc.method === "scm"
      ? `<p class="note" data-role="scm-note">This cadre-model run records its findings per cadre. Open the cadre explorer to see them.</p>`
      : "";
  const skipped =
    doc.skipped.length > 0
      ? `<div class="skipped"><h3>Skipped factors</h3><ul>${doc.skipped
          .map((s) => `<li>${esc(s.factor_id)}: ${esc(s.reason)}</li>`)
          .join("")}</ul></div>`
      : "";

  el.innerHTML = `
    <section class="result" data-result-id="${esc(doc.id)}">
      <h2>${esc(doc.disease_label)} (${esc(doc.method)})</h2>
      <p class="result-meta">
        result <code>${esc(shortHash(doc.id))}</code>,
        seed ${doc.seed}, alpha ${doc.alpha}, engine ${esc(doc.engine_version)},
        recorded ${esc(doc.created_at)}
      </p>
      <div class="result-actions">
        <button type="button" data-action="refine">Refine this study</button>
        <a href="#/results/${esc(doc.id)}/cadres" data-role="cadres-link">Cadre explorer</a>
      </div>
      ${scmNote}
      <div data-role="table">${doc.findings.length > 0 ? findingsTableHtml(doc.findings, doc.alpha, sortKey, sortDir) : ""}</div>
      ${skipped}
      ${provenancePanelHtml(chain)}
      <div class="inline-error" data-role="error"></div>
    </section>`;

  const tableHost = el.querySelector<HTMLElement>('[data-role="table"]')!;
  const errorBox = el.querySelector<HTMLElement>('[data-role="error"]')!;

  function wireSorting(): void {
    for (const th of tableHost.querySelectorAll<HTMLElement>("th[data-sort]")) {
      th.addEventListener("click", () => {
        const key = th.dataset.sort as SortKey;
        if (key === sortKey) {
          sortDir = sortDir === "asc" ? "desc" : "asc";
        } else {
          sortKey = key;
          sortDir = "asc";
        }
        tableHost.innerHTML = findingsTableHtml(doc.findings, doc.alpha, sortKey, sortDir);
        wireSorting();
      });
    }
  }
  wireSorting();

  el.querySelector<HTMLButtonElement>('[data-action="refine"]')!.addEventListener(
    "click",
    () => {
      void (async () => {
        errorBox.textContent = "";
        try {
          const datasets = await ctx.api.listDatasets();
          ctx.drafts.save(draftFromProvenance(chain, datasets));
          ctx.navigate({ view: "designer" });
        } catch (err) {
          if (err instanceof ApiError || err instanceof ServiceUnreachable) {
            errorBox.textContent = "could not clone the study; service error";
          } else {
            throw err;
          }
        }
      })();
    },
  );

  return {};
}
