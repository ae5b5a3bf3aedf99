// Shared plumbing handed to every view.

import type { ApiClient } from "./api.js";
import type { DraftStore } from "./state.js";
import type { Route } from "./router.js";

export interface AppContext {
  api: ApiClient;
  drafts: DraftStore;
  navigate(route: Route): void;
}

// Views return a handle so the app can stop timers when the route changes.
export interface ViewHandle {
  dispose?: () => void;
}
