// Draft persistence and submit-gating rules for the study designer.

import type {
  CartridgeRow,
  DatasetRow,
  ProvenanceChain,
  StudyDraft,
  StudyRequest,
} from "./types.js";

const DRAFT_KEY = "study-ui.draft.v1";

export function emptyDraft(): StudyDraft {
  return {
    responseId: null,
    cohortId: null,
    factorIds: [],
    workflowId: null,
    datasetId: null,
    overrides: {},
  };
}

export interface DraftStore {
  load(): StudyDraft;
  save(draft: StudyDraft): void;
  clear(): void;
}

/** Drafts survive reloads and server outages; storage failures are ignored. */
export function localDraftStore(storage: Storage): DraftStore {
  return {
    load() {
      try {
        const raw = storage.getItem(DRAFT_KEY);
        if (!raw) return emptyDraft();
        const parsed = JSON.parse(raw) as Partial<StudyDraft>;
        return {
          ...emptyDraft(),
          ...parsed,
          factorIds: Array.isArray(parsed.factorIds) ? parsed.factorIds : [],
          overrides:
            parsed.overrides && typeof parsed.overrides === "object"
              ? (parsed.overrides as Record<string, number>)
              : {},
        };
      } catch {
        return emptyDraft();
      }
    },
    save(draft) {
      try {
        storage.setItem(DRAFT_KEY, JSON.stringify(draft));
      } catch {
        // quota or disabled storage; the in-memory draft still works
      }
    },
    clear() {
      try {
        storage.removeItem(DRAFT_KEY);
      } catch {
        // ignore
      }
    },
  };
}

/** Every slot picked and at least one risk-factor set chosen. */
export function draftComplete(draft: StudyDraft): boolean {
  return (
    draft.responseId !== null &&
    draft.cohortId !== null &&
    draft.workflowId !== null &&
    draft.datasetId !== null &&
    draft.factorIds.length > 0
  );
}

export interface Resolution {
  ok: boolean;
  missing: string[];
}

/**
 * Check each selection against the live cartridge and dataset listings.
 * Submit stays disabled until everything resolves.
 */
export function resolveDraft(
  draft: StudyDraft,
  cartridges: CartridgeRow[],
  datasets: DatasetRow[],
): Resolution {
  const missing: string[] = [];
  const byId = new Map(cartridges.map((c) => [c.id, c]));

  const check = (id: string | null, kind: string, slot: string) => {
    if (id === null) {
      missing.push(`${slot}: not selected`);
      return;
    }
    const row = byId.get(id);
    if (!row || row.kind !== kind) missing.push(`${slot}: ${id} not found`);
  };

  check(draft.responseId, "response", "response");
  check(draft.cohortId, "cohort", "cohort");
  check(draft.workflowId, "workflow", "workflow");
  if (draft.factorIds.length === 0) {
    missing.push("risk factors: pick at least one set");
  } else {
    for (const fid of draft.factorIds) {
      const row = byId.get(fid);
      if (!row || row.kind !== "risk-factor") missing.push(`risk factors: ${fid} not found`);
    }
  }
  if (draft.datasetId === null) {
    missing.push("dataset: not selected");
  } else if (!datasets.some((d) => d.id === draft.datasetId)) {
    missing.push(`dataset: ${draft.datasetId} not found`);
  }

  return { ok: missing.length === 0, missing };
}

/** Request body for POST /v1/studies. Caller resolves overrides first. */
export function draftToRequest(draft: StudyDraft, workflowId: string): StudyRequest {
  if (!draft.responseId || !draft.cohortId || !draft.datasetId) {
    throw new Error("draft incomplete");
  }
  return {
    response_id: draft.responseId,
    cohort_id: draft.cohortId,
    factor_ids: [...draft.factorIds],
    workflow_id: workflowId,
    dataset_id: draft.datasetId,
  };
}

/**
 * Clone a recorded study back into a draft (the refine loop). Inputs come
 * from the provenance chain; the dataset id is recovered by matching the
 * recorded fingerprint against the dataset listing.
 */
export function draftFromProvenance(
  chain: ProvenanceChain,
  datasets: DatasetRow[],
): StudyDraft {
  const draft = emptyDraft();
  for (const entry of chain.entries) {
    if (entry.kind === "response") draft.responseId = entry.id;
    else if (entry.kind === "cohort") draft.cohortId = entry.id;
    else if (entry.kind === "risk-factor") draft.factorIds.push(entry.id);
    else if (entry.kind === "workflow") draft.workflowId = entry.id;
  }
  const ds = datasets.find((d) => d.fingerprint === chain.dataset_fingerprint);
  draft.datasetId = ds ? ds.id : null;
  return draft;
}
