// App shell: navigation chrome, hash routing, and view lifecycle. Tests and
// the browser entry point both build the app through createApp.

import { makeClient, type ApiClient } from "./api.js";
import { localDraftStore, type DraftStore } from "./state.js";
import { parseRoute, routeHash, type Route } from "./router.js";
import { renderDesigner } from "./views/designer.js";
import { renderJob } from "./views/job.js";
import { renderResult } from "./views/results.js";
import { renderCadres } from "./views/cadres.js";
import { renderResultsList } from "./views/resultsList.js";
import type { AppContext, ViewHandle } from "./context.js";

export interface AppOptions {
  api: ApiClient;
  drafts: DraftStore;
  window: Window;
}

export interface App {
  render(hash: string): Promise<void>;
  navigate(route: Route): void;
  dispose(): void;
}

export function createApp(root: HTMLElement, opts: AppOptions): App {
  const win = opts.window;
  root.innerHTML = `
    <header class="topbar">
      <span class="brand">riskd studies</span>
      <nav>
        <a href="#/designer" data-nav="designer">Designer</a>
        <a href="#/results" data-nav="results">Results</a>
      </nav>
    </header>
    <main data-role="content"></main>`;
  const content = root.querySelector<HTMLElement>('[data-role="content"]')!;

  let handle: ViewHandle = {};
  let renderedHash: string | null = null;
  let renderSeq = 0;

  const ctx: AppContext = {
    api: opts.api,
    drafts: opts.drafts,
    navigate(route: Route) {
      const hash = routeHash(route);
      if (win.location.hash !== hash) {
        win.location.hash = hash;
      }
      void render(hash);
    },
  };

  async function render(hash: string): Promise<void> {
    if (hash === renderedHash) return;
    renderSeq += 1;
    const seq = renderSeq;
    handle.dispose?.();
    handle = {};
    renderedHash = hash;
    const route = parseRoute(hash);
    for (const link of root.querySelectorAll<HTMLElement>("[data-nav]")) {
      link.classList.toggle(
        "active",
        (link.dataset.nav === "designer" && route.view === "designer") ||
          (link.dataset.nav === "results" && route.view !== "designer"),
      );
    }
    // Each render gets its own frame; a superseded render keeps writing into
    // a detached node instead of clobbering the newer view.
    const frame = win.document.createElement("div");
    frame.className = "view-frame";
    content.replaceChildren(frame);
    let next: ViewHandle;
    switch (route.view) {
      case "designer":
        next = await renderDesigner(frame, ctx);
        break;
      case "results-list":
        next = await renderResultsList(frame, ctx);
        break;
      case "job":
        next = renderJob(frame, ctx, route.jobId);
        break;
      case "result":
        next = await renderResult(frame, ctx, route.resultId);
        break;
      case "cadres":
        next = await renderCadres(frame, ctx, route.resultId);
        break;
    }
    if (seq === renderSeq) {
      handle = next;
    } else {
      next.dispose?.();
    }
  }

  function onHashChange(): void {
    void render(win.location.hash || "#/designer");
  }
  win.addEventListener("hashchange", onHashChange);

  return {
    render,
    navigate: ctx.navigate,
    dispose() {
      win.removeEventListener("hashchange", onHashChange);
      handle.dispose?.();
      handle = {};
    },
  };
}

/** Browser wiring with defaults: same-origin API unless configured. */
export function bootApp(win: Window & typeof globalThis): App {
  const configured =
    (win as { RISKD_API_BASE?: string }).RISKD_API_BASE ??
    win.localStorage.getItem("riskd-api-base") ??
    "";
  const app = createApp(win.document.getElementById("app")!, {
    api: makeClient(configured),
    drafts: localDraftStore(win.localStorage),
    window: win,
  });
  void app.render(win.location.hash || "#/designer");
  return app;
}
