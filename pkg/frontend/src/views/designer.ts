// Study designer: pick response, cohort, risk-factor sets, workflow, and
// dataset; tune workflow hyperparameters; submit to /v1/studies.

import { ApiError, ServiceUnreachable } from "../api.js";
import { esc } from "../format.js";
import { draftComplete, draftToRequest, resolveDraft } from "../state.js";
import type { AppContext, ViewHandle } from "../context.js";
import type {
  CartridgeRow,
  DatasetRow,
  ResponseBody,
  RiskFactorBody,
  StudyDraft,
  WorkflowBody,
} from "../types.js";

// Deterministic suffix for a tuned workflow's cartridge id. Same overrides,
// same id, so re-submitting identical settings reuses the stored cartridge.
function overrideSuffix(overrides: Record<string, number>): string {
  const text = JSON.stringify(
    Object.keys(overrides).sort().map((k) => [k, overrides[k]]),
  );
  let h = 5381;
  for (let i = 0; i < text.length; i += 1) {
    h = ((h * 33) ^ text.charCodeAt(i)) >>> 0;
  }
  return h.toString(16);
}

function optionList(
  rows: { value: string; label: string }[],
  selected: string | null,
): string {
  const blank = `<option value=""${selected === null ? " selected" : ""}>choose...</option>`;
  return (
    blank +
    rows
      .map(
        (r) =>
          `<option value="${esc(r.value)}"${r.value === selected ? " selected" : ""}>${esc(r.label)}</option>`,
      )
      .join("")
  );
}

export async function renderDesigner(
  el: HTMLElement,
  ctx: AppContext,
): Promise<ViewHandle> {
  el.innerHTML = `<p class="loading">Loading catalog...</p>`;

  let cartridges: CartridgeRow[];
  let datasets: DatasetRow[];
  try {
    [cartridges, datasets] = await Promise.all([
      ctx.api.listCartridges(),
      ctx.api.listDatasets(),
    ]);
  } catch (err) {
    if (err instanceof ServiceUnreachable) {
      el.innerHTML = `
        <div class="banner banner-error" data-banner="unreachable">
          <p>The study service is unreachable. Your draft is saved locally and will be here when the service is back.</p>
          <button type="button" data-action="retry">Retry</button>
        </div>`;
      el.querySelector<HTMLButtonElement>('[data-action="retry"]')!.addEventListener(
        "click",
        () => void renderDesigner(el, ctx),
      );
      return {};
    }
    if (err instanceof ApiError) {
      el.innerHTML = `<div class="banner banner-error"><p>${esc(err.code)}: ${esc(err.message)}</p></div>`;
      return {};
    }
    throw err;
  }

  const responses = cartridges.filter((c) => c.kind === "response");
  const cohorts = cartridges.filter((c) => c.kind === "cohort");
  const riskFactors = cartridges.filter((c) => c.kind === "risk-factor");
  const workflows = cartridges.filter((c) => c.kind === "workflow");
  const workflowById = new Map(workflows.map((w) => [w.id, w.body as unknown as WorkflowBody]));

  const draft: StudyDraft = ctx.drafts.load();
  // Drop stale selections that no longer resolve, but keep the rest.
  if (draft.workflowId !== null && !workflowById.has(draft.workflowId)) {
    draft.workflowId = null;
    draft.overrides = {};
  }

  el.innerHTML = `
    <section class="designer">
      <h2>Design a study</h2>
      <form data-role="designer-form">
        <div class="field">
          <label for="sel-response">Health outcome</label>
          <select id="sel-response" data-field="response">
            ${optionList(
              responses.map((r) => ({
                value: r.id,
                label: `${r.id} (${String((r.body as unknown as ResponseBody).disease_label)})`,
              })),
              draft.responseId,
            )}
          </select>
          <div data-role="controls" class="controls-panel"></div>
        </div>
        <div class="field">
          <label for="sel-cohort">Cohort</label>
          <select id="sel-cohort" data-field="cohort">
            ${optionList(
              cohorts.map((c) => ({
                value: c.id,
                label: `${c.id} (${String(c.body.label ?? "")})`,
              })),
              draft.cohortId,
            )}
          </select>
        </div>
        <fieldset class="field" data-role="factors">
          <legend>Risk-factor sets</legend>
          ${riskFactors
            .map((rf) => {
              const body = rf.body as unknown as RiskFactorBody;
              const checked = draft.factorIds.includes(rf.id) ? " checked" : "";
              return `<label class="factor-choice">
                <input type="checkbox" data-factor="${esc(rf.id)}"${checked}>
                ${esc(rf.id)} (${esc(body.category_label)}, ${body.factors.length} factors)
              </label>`;
            })
            .join("")}
        </fieldset>
        <div class="field">
          <label for="sel-workflow">Workflow</label>
          <select id="sel-workflow" data-field="workflow">
            ${optionList(
              workflows.map((w) => ({
                value: w.id,
                label: `${w.id} (${String((w.body as unknown as WorkflowBody).method)})`,
              })),
              draft.workflowId,
            )}
          </select>
          <div data-role="hyperparams" class="hyperparams-panel"></div>
        </div>
        <div class="field">
          <label for="sel-dataset">Dataset</label>
          <select id="sel-dataset" data-field="dataset">
            ${optionList(
              datasets.map((d) => ({
                value: d.id,
                label: `${d.id} (${d.n_rows} rows)`,
              })),
              draft.datasetId,
            )}
          </select>
        </div>
        <div class="submit-row">
          <button type="submit" data-action="submit" disabled>Run study</button>
          <span class="hint" data-role="hint"></span>
        </div>
        <div class="inline-error" data-role="error"></div>
      </form>
    </section>`;

  const form = el.querySelector<HTMLFormElement>('[data-role="designer-form"]')!;
  const controlsPanel = el.querySelector<HTMLElement>('[data-role="controls"]')!;
  const hyperPanel = el.querySelector<HTMLElement>('[data-role="hyperparams"]')!;
  const submitBtn = el.querySelector<HTMLButtonElement>('[data-action="submit"]')!;
  const hint = el.querySelector<HTMLElement>('[data-role="hint"]')!;
  const errorBox = el.querySelector<HTMLElement>('[data-role="error"]')!;

  function renderControls(): void {
    if (draft.responseId === null) {
      controlsPanel.innerHTML = "";
      return;
    }
    const row = responses.find((r) => r.id === draft.responseId);
    if (!row) {
      controlsPanel.innerHTML = "";
      return;
    }
    const body = row.body as unknown as ResponseBody;
    controlsPanel.innerHTML = `
      <p class="controls-title">Required controls (fixed by the outcome)</p>
      ${body.required_controls
        .map(
          (v) =>
            `<input class="control-var" type="text" value="${esc(v)}" readonly disabled>`,
        )
        .join("")}`;
  }

  function renderHyperparams(): void {
    if (draft.workflowId === null) {
      hyperPanel.innerHTML = "";
      return;
    }
    const body = workflowById.get(draft.workflowId);
    if (!body) {
      hyperPanel.innerHTML = "";
      return;
    }
    const rows = Object.entries(body.hyperparams).map(([key, value]) => {
      if (typeof value === "number") {
        const current = draft.overrides[key] ?? value;
        return `<label class="hp-row">
          <span class="hp-name">${esc(key)}</span>
          <input type="number" step="any" data-hp="${esc(key)}" data-default="${value}" value="${current}">
        </label>`;
      }
      return `<label class="hp-row">
        <span class="hp-name">${esc(key)}</span>
        <input type="text" value="${esc(JSON.stringify(value))}" readonly disabled>
      </label>`;
    });
    hyperPanel.innerHTML = `
      <p class="controls-title">Hyperparameters (defaults from ${esc(draft.workflowId)})</p>
      ${rows.join("")}
      <p class="hp-note">Edited values are saved as a tuned copy of the workflow on submit.</p>`;
    for (const input of hyperPanel.querySelectorAll<HTMLInputElement>("input[data-hp]")) {
      input.addEventListener("input", () => {
        const key = input.dataset.hp!;
        const fallback = Number(input.dataset.default);
        const value = input.value === "" ? NaN : Number(input.value);
        if (!Number.isFinite(value) || value === fallback) {
          delete draft.overrides[key];
        } else {
          draft.overrides[key] = value;
        }
        persistAndGate();
      });
    }
  }

  function persistAndGate(): void {
    ctx.drafts.save(draft);
    const resolution = resolveDraft(draft, cartridges, datasets);
    submitBtn.disabled = !resolution.ok;
    hint.textContent = resolution.ok ? "" : resolution.missing.join("; ");
  }

  form.querySelector<HTMLSelectElement>('[data-field="response"]')!.addEventListener(
    "change",
    (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      draft.responseId = value === "" ? null : value;
      renderControls();
      persistAndGate();
    },
  );
  form.querySelector<HTMLSelectElement>('[data-field="cohort"]')!.addEventListener(
    "change",
    (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      draft.cohortId = value === "" ? null : value;
      persistAndGate();
    },
  );
  form.querySelector<HTMLSelectElement>('[data-field="workflow"]')!.addEventListener(
    "change",
    (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      draft.workflowId = value === "" ? null : value;
      draft.overrides = {};
      renderHyperparams();
      persistAndGate();
    },
  );
  form.querySelector<HTMLSelectElement>('[data-field="dataset"]')!.addEventListener(
    "change",
    (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      draft.datasetId = value === "" ? null : value;
      persistAndGate();
    },
  );
  for (const box of form.querySelectorAll<HTMLInputElement>("input[data-factor]")) {
    box.addEventListener("change", () => {
      const id = box.dataset.factor!;
      if (box.checked) {
        if (!draft.factorIds.includes(id)) draft.factorIds.push(id);
      } else {
        draft.factorIds = draft.factorIds.filter((f) => f !== id);
      }
      persistAndGate();
    });
  }

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submit();
  });

  async function submit(): Promise<void> {
    errorBox.textContent = "";
    if (!draftComplete(draft)) return;
    submitBtn.disabled = true;
    try {
      let workflowRef = draft.workflowId!;
      if (Object.keys(draft.overrides).length > 0) {
        const baseBody = workflowById.get(draft.workflowId!)!;
        const tuned = {
          ...baseBody,
          id: `${draft.workflowId}-tuned-${overrideSuffix(draft.overrides)}`,
          hyperparams: { ...baseBody.hyperparams, ...draft.overrides },
        };
        const stored = await ctx.api.uploadCartridge(tuned as unknown as Record<string, unknown>);
        workflowRef = stored.hash;
      }
      const submitted = await ctx.api.submitStudy(draftToRequest(draft, workflowRef));
      ctx.navigate({ view: "job", jobId: submitted.job_id });
    } catch (err) {
      if (err instanceof ApiError) {
        errorBox.textContent = `${err.code}: ${err.message}`;
      } else if (err instanceof ServiceUnreachable) {
        errorBox.textContent = "service unreachable; draft kept, try again";
      } else {
        throw err;
      }
      persistAndGate();
    }
  }

  renderControls();
  renderHyperparams();
  persistAndGate();
  return {};
}
