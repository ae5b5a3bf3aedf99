// Hash-fragment routing. Unknown fragments fall back to the designer.

export type Route =
  | { view: "designer" }
  | { view: "results-list" }
  | { view: "job"; jobId: string }
  | { view: "result"; resultId: string }
  | { view: "cadres"; resultId: string };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter((p) => p.length > 0);
  if (parts[0] === "jobs" && parts[1]) return { view: "job", jobId: parts[1] };
  if (parts[0] === "results" && parts[1]) {
    if (parts[2] === "cadres") return { view: "cadres", resultId: parts[1] };
    return { view: "result", resultId: parts[1] };
  }
  if (parts[0] === "results") return { view: "results-list" };
  return { view: "designer" };
}

export function routeHash(route: Route): string {
  switch (route.view) {
    case "designer":
      return "#/designer";
    case "results-list":
      return "#/results";
    case "job":
      return `#/jobs/${route.jobId}`;
    case "result":
      return `#/results/${route.resultId}`;
    case "cadres":
      return `#/results/${route.resultId}/cadres`;
  }
}
