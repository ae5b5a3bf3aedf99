// Results view: table ordering, highlighting, provenance, and refine.

import { afterEach, beforeEach, describe, expect, it } from "vitest";
import {
  EWAS_RESULT_ID,
  SCM_RESULT_ID,
  fixtureFetch,
  flush,
  loadFixture,
  makeTestApp,
  waitFor,
  type TestApp,
} from "./helpers.js";
import type { ResultDoc } from "../src/types.js";

let t: TestApp;

beforeEach(() => {
  window.localStorage.clear();
  window.history.replaceState(null, "", "#/");
});

afterEach(() => {
  t.app.dispose();
  t.container.remove();
});

async function openResult(id: string, stub = fixtureFetch()): Promise<TestApp> {
  t = makeTestApp(stub);
  await t.app.render(`#/results/${id}`);
  await flush();
  return t;
}

function columnFactors(container: HTMLElement): string[] {
  return [...container.querySelectorAll<HTMLElement>("tbody tr")].map(
    (tr) => tr.dataset.factor!,
  );
}

describe("results view", () => {
  it("sorts by adjusted p by default and highlights significant rows", async () => {
    const { container } = await openResult(EWAS_RESULT_ID);
    const rows = [...container.querySelectorAll<HTMLElement>("tbody tr")];
    expect(rows).toHaveLength(11);
    expect(rows[0]!.dataset.factor).toBe("LBXBPB");
    expect(rows[0]!.classList.contains("sig")).toBe(true);
    expect(container.querySelectorAll("tbody tr.sig")).toHaveLength(1);
    // stars follow the engine's convention for the planted factor
    expect(rows[0]!.textContent).toContain("***");
  });

  it("matches the recorded results snapshot", async () => {
    const { container } = await openResult(EWAS_RESULT_ID);
    expect(container.innerHTML).toMatchSnapshot();
  });

  it("toggles coefficient sorting deterministically", async () => {
    const { container } = await openResult(EWAS_RESULT_ID);
    const doc = loadFixture<ResultDoc>("result-ewas.json");
    const byCoefAsc = [...doc.findings]
      .sort((a, b) => a.coefficient - b.coefficient || a.factor_id.localeCompare(b.factor_id))
      .map((f) => f.factor_id);

    const clickCoef = () =>
      container
        .querySelector<HTMLElement>('th[data-sort="coefficient"]')!
        .click();

    clickCoef();
    expect(columnFactors(container)).toEqual(byCoefAsc);
    clickCoef();
    expect(columnFactors(container)).toEqual([...byCoefAsc].reverse());
    clickCoef();
    expect(columnFactors(container)).toEqual(byCoefAsc);
  });

  it("lists every provenance entry as resolved", async () => {
    const { container } = await openResult(EWAS_RESULT_ID);
    const entries = [
      ...container.querySelectorAll<HTMLElement>('[data-role="provenance"] li'),
    ];
    expect(entries.length).toBeGreaterThanOrEqual(4);
    expect(entries).toHaveLength(6);
    for (const li of entries) {
      expect(li.dataset.resolved).toBe("true");
      expect(li.textContent).toContain("resolved");
    }
    expect(entries.map((li) => li.dataset.kind)).toEqual([
      "response",
      "cohort",
      "risk-factor",
      "risk-factor",
      "risk-factor",
      "workflow",
    ]);
  });

  it("clones the study into a new draft on refine", async () => {
    const { container, drafts } = await openResult(EWAS_RESULT_ID);
    container.querySelector<HTMLButtonElement>('[data-action="refine"]')!.click();
    await waitFor(() => window.location.hash === "#/designer");
    const draft = drafts.load();
    expect(draft.responseId).toBe("resp-hypertension");
    expect(draft.cohortId).toBe("coh-adults");
    expect(draft.factorIds).toEqual(["rf-heavy-metals", "rf-urinary-pahs", "rf-lifestyle"]);
    expect(draft.workflowId).toBe("wf-ewas");
    expect(draft.datasetId).toBe("extract");
    // the designer re-opens with the cloned selections in place
    await waitFor(() =>
      Boolean(t.container.querySelector<HTMLSelectElement>('[data-field="response"]')),
    );
    expect(
      t.container.querySelector<HTMLSelectElement>('[data-field="response"]')!.value,
    ).toBe("resp-hypertension");
  });

  it("shows a friendly view for an unknown result id", async () => {
    const stub = fixtureFetch();
    stub.set("GET /v1/results/feedbead", () => ({
      status: 404,
      body: { code: "not-found", message: "no stored record" },
    }));
    stub.set("GET /v1/results/feedbead/provenance", () => ({
      status: 404,
      body: { code: "not-found", message: "no stored record" },
    }));
    const { container } = await openResult("feedbead", stub);
    expect(container.querySelector('[data-role="not-found"]')).toBeTruthy();
    expect(container.textContent).toContain("Result not found");
    expect(container.querySelector('a[href="#/designer"]')).toBeTruthy();
  });

  it("points cadre-model results at the cadre explorer", async () => {
    const { container } = await openResult(SCM_RESULT_ID);
    expect(container.querySelector('[data-role="scm-note"]')).toBeTruthy();
    expect(container.querySelectorAll("tbody tr")).toHaveLength(0);
    const link = container.querySelector<HTMLAnchorElement>('[data-role="cadres-link"]')!;
    expect(link.getAttribute("href")).toBe(`#/results/${SCM_RESULT_ID}/cadres`);
  });
});
