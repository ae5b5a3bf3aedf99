// Recorded-results browser: headers only, with the service's query filters.

import { ApiError, ServiceUnreachable } from "../api.js";
import { esc, shortHash } from "../format.js";
import type { AppContext, ViewHandle } from "../context.js";
import type { ResultHeader } from "../types.js";

function rowsHtml(rows: ResultHeader[]): string {
  if (rows.length === 0) {
    return `<p class="empty-state">No recorded results match.</p>`;
  }
  const body = rows
    .map(
      (r) => `<tr data-result-id="${esc(r.id)}">
        <td><a href="#/results/${esc(r.id)}"><code>${esc(shortHash(r.id))}</code></a></td>
        <td>${esc(r.disease_label)}</td>
        <td>${esc(r.method)}</td>
        <td>${r.n_findings}</td>
        <td>${r.n_significant}</td>
        <td>${r.significant_factors.map(esc).join(", ")}</td>
        <td>${esc(r.created_at)}</td>
      </tr>`,
    )
    .join("");
  return `<table class="results-list">
    <thead><tr>
      <th>result</th><th>outcome</th><th>method</th>
      <th>findings</th><th>significant</th><th>flagged factors</th><th>recorded</th>
    </tr></thead>
    <tbody>${body}</tbody>
  </table>`;
}

export async function renderResultsList(
  el: HTMLElement,
  ctx: AppContext,
): Promise<ViewHandle> {
  el.innerHTML = `
    <section class="results-browser">
      <h2>Recorded results</h2>
      <form class="filters" data-role="filters">
        <label>outcome <input type="text" data-filter="disease" placeholder="any"></label>
        <label>method
          <select data-filter="method">
            <option value="">any</option>
            <option value="swglm-ewas">swglm-ewas</option>
            <option value="scm">scm</option>
          </select>
        </label>
        <label><input type="checkbox" data-filter="significant"> significant only</label>
        <button type="submit">Apply</button>
      </form>
      <div data-role="listing"><p class="loading">Loading...</p></div>
    </section>`;

  const listing = el.querySelector<HTMLElement>('[data-role="listing"]')!;
  const form = el.querySelector<HTMLFormElement>('[data-role="filters"]')!;

  async function refresh(): Promise<void> {
    const disease = form.querySelector<HTMLInputElement>('[data-filter="disease"]')!.value.trim();
    const method = form.querySelector<HTMLSelectElement>('[data-filter="method"]')!.value;
    const significant = form.querySelector<HTMLInputElement>('[data-filter="significant"]')!.checked;
    try {
      const rows = await ctx.api.queryResults({
        ...(disease ? { disease_label: disease } : {}),
        ...(method ? { method } : {}),
        ...(significant ? { significant_only: true } : {}),
      });
      listing.innerHTML = rowsHtml(rows);
    } catch (err) {
      if (err instanceof ServiceUnreachable) {
        listing.innerHTML = `<div class="banner banner-error"><p>The study service is unreachable.</p></div>`;
      } else if (err instanceof ApiError) {
        listing.innerHTML = `<p class="inline-error">${esc(err.code)}: ${esc(err.message)}</p>`;
      } else {
        throw err;
      }
    }
  }

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void refresh();
  });

  await refresh();
  return {};
}
