// Inline SVG charts: horizontal count bars and mean +/- SD interval glyphs.
// Pure string builders; every printed value comes straight from the caller.

import { esc, fmtCount, fmtMean } from "./format.js";

const BAR_WIDTH = 180;
const BAR_HEIGHT = 14;
const ROW_GAP = 6;
const LABEL_WIDTH = 150;

/**
 * Horizontal bars, one per category. `scaleMax` sets the full-bar value so
 * the same variable lines up across side-by-side panels.
 */
export function countBarsSvg(
  counts: Record<string, number>,
  scaleMax: number,
): string {
  const entries = Object.entries(counts);
  const rowPitch = BAR_HEIGHT + ROW_GAP;
  const height = entries.length * rowPitch;
  const width = LABEL_WIDTH + BAR_WIDTH + 60;
  const safeMax = scaleMax > 0 ? scaleMax : 1;
  const rows = entries.map(([label, value], i) => {
    const y = i * rowPitch;
    const w = Math.max(0, Math.min(1, value / safeMax)) * BAR_WIDTH;
    const textY = y + BAR_HEIGHT - 3;
    return (
      `<text x="${LABEL_WIDTH - 6}" y="${textY}" text-anchor="end" class="bar-label">${esc(label)}</text>` +
      `<rect x="${LABEL_WIDTH}" y="${y}" width="${w.toFixed(1)}" height="${BAR_HEIGHT}" class="bar" data-label="${esc(label)}" data-value="${value}"></rect>` +
      `<text x="${LABEL_WIDTH + w + 4}" y="${textY}" class="bar-value">${fmtCount(value)}</text>`
    );
  });
  return (
    `<svg class="count-bars" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}" role="img">` +
    rows.join("") +
    `</svg>`
  );
}

/**
 * One-row interval glyph: line spanning mean +/- SD with a dot at the mean,
 * drawn on the caller's shared [lo, hi] axis.
 */
export function meanSdSvg(
  mean: number,
  sd: number,
  lo: number,
  hi: number,
): string {
  const width = 200;
  const height = 16;
  const span = hi - lo > 0 ? hi - lo : 1;
  const sx = (v: number) => {
    const t = (v - lo) / span;
    return Math.max(0, Math.min(1, t)) * (width - 8) + 4;
  };
  const x0 = sx(mean - sd);
  const x1 = sx(mean + sd);
  const xm = sx(mean);
  const mid = height / 2;
  return (
    `<svg class="mean-sd" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}" role="img" ` +
    `data-mean="${mean}" data-sd="${sd}">` +
    `<line x1="${x0.toFixed(1)}" y1="${mid}" x2="${x1.toFixed(1)}" y2="${mid}" class="sd-range"></line>` +
    `<circle cx="${xm.toFixed(1)}" cy="${mid}" r="3.5" class="mean-dot"></circle>` +
    `<title>${fmtMean(mean)} +/- ${fmtMean(sd)}</title>` +
    `</svg>`
  );
}
