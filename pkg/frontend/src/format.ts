// Display formatting. Values pass through unchanged apart from rounding for
// screen width; nothing here derives new quantities.

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function fmtCoef(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x !== 0 && (Math.abs(x) >= 1e4 || Math.abs(x) < 1e-3)) {
    return x.toExponential(2);
  }
  return x.toFixed(3);
}

export function fmtP(p: number): string {
  if (!Number.isFinite(p)) return String(p);
  if (p === 0) return "0";
  if (p < 1e-4) return p.toExponential(2);
  return p.toFixed(4);
}

export function fmtMean(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x !== 0 && (Math.abs(x) >= 1e5 || Math.abs(x) < 1e-2)) {
    return x.toExponential(2);
  }
  return x.toFixed(2);
}

export function fmtCount(x: number): string {
  return Number.isInteger(x) ? String(x) : x.toFixed(1);
}

/** Same star convention the service's CLI uses. */
export function stars(adjustedP: number, alpha: number): string {
  if (adjustedP < 0.001) return "***";
  if (adjustedP < 0.01) return "**";
  if (adjustedP < alpha) return "*";
  return "";
}

export function shortHash(hash: string): string {
  return hash.length > 12 ? hash.slice(0, 12) : hash;
}
