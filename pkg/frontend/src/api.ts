// Thin typed client for the /v1 API. Every view talks to the service through
// this module; nothing else in the app issues requests.

import type {
  CadresPayload,
  CartridgeKind,
  CartridgeRow,
  DatasetRow,
  JobSnapshot,
  ProvenanceChain,
  ResultDoc,
  ResultHeader,
  StudyRequest,
} from "./types.js";

/** Service answered with a structured error body. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, code: string, message: string, detail?: unknown) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

/** Could not reach the service at all (connection refused, DNS, timeout). */
export class ServiceUnreachable extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "ServiceUnreachable";
    this.cause = cause;
  }
}

export interface ResultQuery {
  disease_label?: string;
  factor?: string;
  significant_only?: boolean;
  method?: string;
}

export interface ApiClient {
  listCartridges(kind?: CartridgeKind): Promise<CartridgeRow[]>;
  getCartridge(ref: string): Promise<CartridgeRow>;
  uploadCartridge(body: Record<string, unknown>): Promise<{ hash: string; id: string; kind: string }>;
  listDatasets(): Promise<DatasetRow[]>;
  submitStudy(req: StudyRequest): Promise<{ job_id: string; status: string }>;
  getJob(jobId: string): Promise<JobSnapshot>;
  getResult(resultId: string): Promise<ResultDoc>;
  getProvenance(resultId: string): Promise<ProvenanceChain>;
  getCadres(resultId: string): Promise<CadresPayload>;
  queryResults(query?: ResultQuery): Promise<ResultHeader[]>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function decode(resp: Response): Promise<unknown> {
  const text = await resp.text();
  if (resp.ok) {
    return text ? JSON.parse(text) : null;
  }
  let code = `http-${resp.status}`;
  let message = resp.statusText || "request failed";
  let detail: unknown;
  try {
    const body = JSON.parse(text) as Record<string, unknown>;
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
    detail = body.detail;
  } catch {
    // non-JSON error body, keep the HTTP fallback
  }
  throw new ApiError(resp.status, code, message, detail);
}

export function makeClient(baseUrl: string, fetchFn?: FetchLike): ApiClient {
  const doFetch: FetchLike = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  const base = baseUrl.replace(/\/+$/, "");

  async function call(path: string, init?: RequestInit): Promise<unknown> {
    let resp: Response;
    try {
      resp = await doFetch(base + path, init);
    } catch (err) {
      throw new ServiceUnreachable(err);
    }
    return decode(resp);
  }

  function post(path: string, body: unknown): Promise<unknown> {
    return call(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  return {
    async listCartridges(kind) {
      const qs = kind ? `?kind=${encodeURIComponent(kind)}` : "";
      const doc = (await call(`/v1/cartridges${qs}`)) as { cartridges: CartridgeRow[] };
      return doc.cartridges;
    },
    async getCartridge(ref) {
      return (await call(`/v1/cartridges/${encodeURIComponent(ref)}`)) as CartridgeRow;
    },
    async uploadCartridge(body) {
      return (await post("/v1/cartridges", body)) as { hash: string; id: string; kind: string };
    },
    async listDatasets() {
      const doc = (await call("/v1/datasets")) as { datasets: DatasetRow[] };
      return doc.datasets;
    },
    async submitStudy(req) {
      return (await post("/v1/studies", req)) as { job_id: string; status: string };
    },
    async getJob(jobId) {
      return (await call(`/v1/jobs/${encodeURIComponent(jobId)}`)) as JobSnapshot;
    },
    async getResult(resultId) {
      return (await call(`/v1/results/${encodeURIComponent(resultId)}`)) as ResultDoc;
    },
    async getProvenance(resultId) {
      return (await call(`/v1/results/${encodeURIComponent(resultId)}/provenance`)) as ProvenanceChain;
    },
    async getCadres(resultId) {
      return (await call(`/v1/results/${encodeURIComponent(resultId)}/cadres`)) as CadresPayload;
    },
    async queryResults(query = {}) {
      const params = new URLSearchParams();
      if (query.disease_label !== undefined) params.set("disease_label", query.disease_label);
      if (query.factor !== undefined) params.set("factor", query.factor);
      if (query.significant_only !== undefined) {
        params.set("significant_only", query.significant_only ? "true" : "false");
      }
      if (query.method !== undefined) params.set("method", query.method);
      const qs = params.toString();
      const doc = (await call(`/v1/results${qs ? `?${qs}` : ""}`)) as { results: ResultHeader[] };
      return doc.results;
    },
  };
}
