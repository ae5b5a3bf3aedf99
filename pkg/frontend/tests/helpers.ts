// Test harness: recorded API fixtures served through a fetch stub, plus app
// construction against a jsdom document. No live service is involved.

import { existsSync, readFileSync } from "node:fs";
import { resolve } from "node:path";
import { createApp, type App } from "../src/app.js";
import { makeClient } from "../src/api.js";
import { localDraftStore, type DraftStore } from "../src/state.js";

// Anchored on the package directory whether vitest runs from frontend/ or
// the repository root.
const FIXTURE_DIR = existsSync(resolve(process.cwd(), "tests/fixtures"))
  ? resolve(process.cwd(), "tests/fixtures")
  : resolve(process.cwd(), "frontend/tests/fixtures");

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(resolve(FIXTURE_DIR, name), "utf-8")) as T;
}

export const EWAS_RESULT_ID =
  "c72e6a66b96df3ac9b3c4ea309272929c59b8e159a9757af7cea113b9b113421";
export const SCM_RESULT_ID =
  "7f347803790348b559a4c282be7ba92090835c96fa5ef65d304ce75aece53fcf";

export interface StubResponse {
  status: number;
  body: unknown;
}

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export interface FetchStub {
  fetch: (url: string, init?: RequestInit) => Promise<Response>;
  calls: RecordedCall[];
  /** Replace the handler for an exact "METHOD path" key. */
  set(key: string, handler: (call: RecordedCall) => StubResponse): void;
  /** Simulate the service being down for all routes. */
  failAll(on: boolean): void;
}

function asResponse(stub: StubResponse): Response {
  return {
    ok: stub.status >= 200 && stub.status < 300,
    status: stub.status,
    statusText: String(stub.status),
    text: async () => (stub.body === null ? "" : JSON.stringify(stub.body)),
  } as unknown as Response;
}

/**
 * Routes /v1 traffic to the recorded fixtures. Keys are "METHOD pathname";
 * query strings are preserved on the recorded call for assertions.
 */
export function fixtureFetch(): FetchStub {
  const cartridges = loadFixture<{ cartridges: { kind: string }[] }>("cartridges.json");
  const datasets = loadFixture<unknown>("datasets.json");
  const jobDone = loadFixture<{ job_id: string }>("job-done.json");
  const resultEwas = loadFixture<unknown>("result-ewas.json");
  const resultScm = loadFixture<unknown>("result-scm.json");
  const provenance = loadFixture<unknown>("provenance.json");
  const cadres = loadFixture<unknown>("cadres.json");
  const resultsList = loadFixture<unknown>("results-list.json");

  const handlers = new Map<string, (call: RecordedCall) => StubResponse>();
  const calls: RecordedCall[] = [];
  let down = false;

  handlers.set("GET /v1/cartridges", (call) => {
    const kind = new URL(call.url).searchParams.get("kind");
    if (!kind) return { status: 200, body: cartridges };
    return {
      status: 200,
      body: { cartridges: cartridges.cartridges.filter((c) => c.kind === kind) },
    };
  });
  handlers.set("GET /v1/datasets", () => ({ status: 200, body: datasets }));
  handlers.set(`GET /v1/jobs/${jobDone.job_id}`, () => ({ status: 200, body: jobDone }));
  handlers.set(`GET /v1/results/${EWAS_RESULT_ID}`, () => ({ status: 200, body: resultEwas }));
  handlers.set(`GET /v1/results/${SCM_RESULT_ID}`, () => ({ status: 200, body: resultScm }));
  handlers.set(`GET /v1/results/${EWAS_RESULT_ID}/provenance`, () => ({
    status: 200,
    body: provenance,
  }));
  handlers.set(`GET /v1/results/${SCM_RESULT_ID}/provenance`, () => ({
    status: 200,
    body: provenance,
  }));
  handlers.set(`GET /v1/results/${SCM_RESULT_ID}/cadres`, () => ({ status: 200, body: cadres }));
  handlers.set(`GET /v1/results/${EWAS_RESULT_ID}/cadres`, () => ({
    status: 409,
    body: {
      code: "wrong-method",
      message: "result was produced by swglm-ewas; cadres need a cadre-model result",
    },
  }));
  handlers.set("GET /v1/results", () => ({ status: 200, body: resultsList }));
  handlers.set("POST /v1/studies", () => ({
    status: 202,
    body: { job_id: jobDone.job_id, status: "queued" },
  }));
  handlers.set("POST /v1/cartridges", (call) => {
    const body = call.body as { id: string; kind: string };
    return { status: 201, body: { hash: "ab".repeat(32), id: body.id, kind: body.kind } };
  });

  return {
    calls,
    set(key, handler) {
      handlers.set(key, handler);
    },
    failAll(on) {
      down = on;
    },
    fetch: async (url, init) => {
      const method = init?.method ?? "GET";
      const call: RecordedCall = {
        method,
        url,
        body: init?.body ? JSON.parse(String(init.body)) : null,
      };
      calls.push(call);
      if (down) throw new TypeError("fetch failed");
      const key = `${method} ${new URL(url).pathname}`;
      const handler = handlers.get(key);
      if (!handler) {
        return asResponse({
          status: 404,
          body: { code: "not-found", message: `no handler for ${key}` },
        });
      }
      return asResponse(handler(call));
    },
  };
}

export interface TestApp {
  app: App;
  container: HTMLElement;
  stub: FetchStub;
  drafts: DraftStore;
}

export function makeTestApp(stub: FetchStub = fixtureFetch()): TestApp {
  const container = document.createElement("div");
  document.body.appendChild(container);
  const drafts = localDraftStore(window.localStorage);
  const app = createApp(container, {
    api: makeClient("http://svc.test", stub.fetch),
    drafts,
    window,
  });
  return { app, container, stub, drafts };
}

/** Wait until `check` stops throwing or returns true. Real-timer polling. */
export async function waitFor(
  check: () => boolean | void,
  timeoutMs = 5000,
  stepMs = 25,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = new Error("condition never held");
  while (Date.now() < deadline) {
    try {
      if (check() !== false) return;
      lastError = new Error("condition returned false");
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
  throw lastError;
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export function select(container: HTMLElement, selector: string, value: string): void {
  const el = container.querySelector<HTMLSelectElement>(selector);
  if (!el) throw new Error(`no element ${selector}`);
  el.value = value;
  el.dispatchEvent(new window.Event("change", { bubbles: true }));
}

export function submitForm(container: HTMLElement, selector: string): void {
  const form = container.querySelector<HTMLFormElement>(selector);
  if (!form) throw new Error(`no form ${selector}`);
  form.dispatchEvent(new window.Event("submit", { bubbles: true, cancelable: true }));
}
