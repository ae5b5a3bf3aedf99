// Job monitor: polls the job once per second until it settles, then hands
// off to the result view. Responses for other jobs or from superseded polls
// are discarded.

import { ApiError, ServiceUnreachable } from "../api.js";
import { esc } from "../format.js";
import type { AppContext, ViewHandle } from "../context.js";
import type { JobSnapshot } from "../types.js";

export const POLL_INTERVAL_MS = 1000;

export function renderJob(
  el: HTMLElement,
  ctx: AppContext,
  jobId: string,
): ViewHandle {
  el.innerHTML = `
    <section class="job" data-job-id="${esc(jobId)}">
      <h2>Study job</h2>
      <p class="job-id">job ${esc(jobId)}</p>
      <p class="job-status" data-role="status">checking...</p>
      <div data-role="progress"></div>
      <div data-role="request"></div>
      <div class="inline-error" data-role="error"></div>
    </section>`;

  const statusEl = el.querySelector<HTMLElement>('[data-role="status"]')!;
  const progressEl = el.querySelector<HTMLElement>('[data-role="progress"]')!;
  const requestEl = el.querySelector<HTMLElement>('[data-role="request"]')!;
  const errorEl = el.querySelector<HTMLElement>('[data-role="error"]')!;

  let disposed = false;
  let timer: ReturnType<typeof setInterval> | null = null;
  let pollSeq = 0;
  let appliedSeq = 0;

  function stop(): void {
    if (timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  }

  function apply(snapshot: JobSnapshot): void {
    statusEl.textContent = snapshot.status;
    statusEl.dataset.status = snapshot.status;
    if (snapshot.progress) {
      const { stage, current, total } = snapshot.progress;
      progressEl.innerHTML = `
        <progress max="${total}" value="${current}"></progress>
        <span class="progress-text">${esc(stage)} ${current}/${total}</span>`;
    }
    requestEl.innerHTML = `
      <dl class="request-summary">
        <dt>outcome</dt><dd>${esc(snapshot.request.response_id)}</dd>
        <dt>cohort</dt><dd>${esc(snapshot.request.cohort_id)}</dd>
        <dt>risk factors</dt><dd>${snapshot.request.factor_ids.map(esc).join(", ")}</dd>
        <dt>workflow</dt><dd>${esc(snapshot.request.workflow_id)}</dd>
        <dt>dataset</dt><dd>${esc(snapshot.request.dataset_id)}</dd>
      </dl>`;
    if (snapshot.status === "done" && snapshot.result_id) {
      stop();
      ctx.navigate({ view: "result", resultId: snapshot.result_id });
    } else if (snapshot.status === "failed") {
      stop();
      errorEl.textContent = `job failed: ${snapshot.error ?? "unknown error"}`;
    }
  }

  async function poll(): Promise<void> {
    pollSeq += 1;
    const seq = pollSeq;
    let snapshot: JobSnapshot;
    try {
      snapshot = await ctx.api.getJob(jobId);
    } catch (err) {
      if (disposed) return;
      if (err instanceof ApiError && err.status === 404) {
        stop();
        statusEl.textContent = "not found";
        errorEl.textContent = `${err.code}: ${err.message}`;
        return;
      }
      if (err instanceof ServiceUnreachable) {
        statusEl.textContent = "service unreachable, retrying...";
        return;
      }
      throw err;
    }
    // Stale guards: view gone, different job, or an older in-flight poll
    // landing after a newer one.
    if (disposed || snapshot.job_id !== jobId || seq <= appliedSeq) return;
    appliedSeq = seq;
    apply(snapshot);
  }

  void poll();
  timer = setInterval(() => void poll(), POLL_INTERVAL_MS);

  return {
    dispose() {
      disposed = true;
      stop();
    },
  };
}
