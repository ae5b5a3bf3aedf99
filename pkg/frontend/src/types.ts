// Wire types for the riskd /v1 JSON API, plus the local draft shape.
// Field names mirror the service payloads exactly; keep them snake_case.

export type CartridgeKind =
  | "response"
  | "cohort"
  | "risk-factor"
  | "workflow"
  | "results";

export interface CartridgeRow {
  hash: string;
  kind: CartridgeKind;
  id: string;
  body: Record<string, unknown>;
}

export interface WorkflowBody {
  kind: "workflow";
  id: string;
  preprocessing: string[];
  method: string;
  hyperparams: Record<string, unknown>;
}

export interface ResponseBody {
  kind: "response";
  id: string;
  disease_label: string;
  response_var: string;
  positive_rule: { op: string; value: number };
  required_controls: string[];
  domain_axioms: string[];
}

export interface RiskFactorBody {
  kind: "risk-factor";
  id: string;
  category_label: string;
  factors: string[];
  per_factor_axioms: Record<string, string[]>;
}

export interface DatasetRow {
  id: string;
  n_rows: number;
  n_vars: number;
  fingerprint: string;
}

export interface Finding {
  factor_id: string;
  coefficient: number;
  robust_se: number;
  p_value: number;
  adjusted_p: number;
  significant: boolean;
  n_used: number;
  direction: string;
}

export interface SkippedFactor {
  factor_id: string;
  reason: string;
}

export interface InputRef {
  id: string;
  hash: string;
}

export interface ResultDoc {
  kind: "results";
  id: string;
  input_refs: {
    response: InputRef;
    cohort: InputRef;
    risk_factors: InputRef[];
    dataset_fingerprint: string;
  };
  method: string;
  seed: number;
  engine_version: string;
  disease_label: string;
  alpha: number;
  findings: Finding[];
  skipped: SkippedFactor[];
  scm_payload?: unknown;
  created_at: string;
}

export interface ChainEntry {
  kind: string;
  id: string;
  hash: string;
  resolved: boolean;
}

export interface ProvenanceChain {
  result_id: string;
  entries: ChainEntry[];
  dataset_fingerprint: string;
}

export interface CadreSummary {
  cadre: number;
  count: number;
  weighted_count: number;
  continuous: Record<string, { mean: number; sd: number; n: number }>;
  categorical: Record<string, Record<string, number>>;
}

export interface CadreScan {
  cadre: number;
  testable: boolean;
  reason: string;
  results: Finding[];
  skipped: SkippedFactor[];
}

export interface CadresPayload {
  result_id: string;
  summaries: CadreSummary[];
  per_cadre: CadreScan[];
  model: Record<string, unknown>;
}

export interface StudyRequest {
  response_id: string;
  cohort_id: string;
  factor_ids: string[];
  workflow_id: string;
  dataset_id: string;
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobProgress {
  stage: string;
  current: number;
  total: number;
}

export interface JobSnapshot {
  job_id: string;
  status: JobStatus;
  request: StudyRequest;
  result_id: string | null;
  error: string | null;
  progress: JobProgress | null;
}

export interface ResultHeader {
  id: string;
  created_at: string;
  method: string;
  disease_label: string;
  seed: number;
  n_findings: number;
  n_significant: number;
  significant_factors: string[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

// Local working state of the designer form. Hyperparam overrides are kept
// separate from the base workflow so an untouched form submits the stock
// cartridge id unchanged.
export interface StudyDraft {
  responseId: string | null;
  cohortId: string | null;
  factorIds: string[];
  workflowId: string | null;
  datasetId: string | null;
  overrides: Record<string, number>;
}
