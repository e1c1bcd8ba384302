// Archive explorer: the 2D feature-bin grid colored by legibility score.

import type { ArchiveDoc, WorkspaceSpec } from "./types";

export interface HeatCell {
  i: number;
  j: number;
  score: number;
  workspace: WorkspaceSpec;
}

export function parseCells(doc: ArchiveDoc): HeatCell[] {
  return Object.entries(doc.cells).map(([key, cell]) => {
    const [i, j] = key.split(",").map(Number);
    return { i, j, score: cell.score, workspace: cell.workspace };
  });
}

export function scoreRange(cells: HeatCell[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const c of cells) {
    lo = Math.min(lo, c.score);
    hi = Math.max(hi, c.score);
  }
  return [lo, hi];
}

/** Normalized position of a score within the archive's [min, max] range. */
export function normalizeScore(score: number, lo: number, hi: number): number {
  if (hi <= lo) return 1.0;
  return (score - lo) / (hi - lo);
}

export function colorFor(t: number): string {
  // dark blue -> teal -> yellow ramp
  const stops: [number, [number, number, number]][] = [
    [0.0, [48, 18, 107]],
    [0.5, [33, 144, 140]],
    [1.0, [253, 231, 37]],
  ];
  let prev = stops[0];
  for (const stop of stops) {
    if (t <= stop[0]) {
      const [t0, c0] = prev;
      const [t1, c1] = stop;
      const u = t1 === t0 ? 0 : (t - t0) / (t1 - t0);
      const c = c0.map((v, k) => Math.round(v + u * (c1[k] - v)));
      return `rgb(${c[0]}, ${c[1]}, ${c[2]})`;
    }
    prev = stop;
  }
  const last = stops[stops.length - 1][1];
  return `rgb(${last[0]}, ${last[1]}, ${last[2]})`;
}

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  doc: ArchiveDoc,
  onLayout?: (cellRects: Map<string, [number, number, number, number]>) => void
): void {
  const cells = parseCells(doc);
  const width = ctx.canvas.width;
  const height = ctx.canvas.height;
  ctx.fillStyle = "#1c1c22";
  ctx.fillRect(0, 0, width, height);
  if (!cells.length) {
    ctx.fillStyle = "#999";
    ctx.font = "13px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("archive is empty", width / 2, height / 2);
    return;
  }
  const rows = doc.descriptor.min_distance_bins;
  const cols = doc.descriptor.ordering_cardinality;
  const cw = width / cols;
  const ch = height / rows;
  const [lo, hi] = scoreRange(cells);
  const rects = new Map<string, [number, number, number, number]>();
  for (const cell of cells) {
    const x = cell.j * cw;
    const y = height - (cell.i + 1) * ch;
    ctx.fillStyle = colorFor(normalizeScore(cell.score, lo, hi));
    ctx.fillRect(x, y, Math.max(cw, 1), Math.max(ch, 1));
    rects.set(`${cell.i},${cell.j}`, [x, y, Math.max(cw, 1), Math.max(ch, 1)]);
  }
  onLayout?.(rects);
}

export function cellAt(
  doc: ArchiveDoc,
  width: number,
  height: number,
  x: number,
  y: number
): HeatCell | null {
  const rows = doc.descriptor.min_distance_bins;
  const cols = doc.descriptor.ordering_cardinality;
  const j = Math.floor((x / width) * cols);
  const i = Math.floor(((height - y) / height) * rows);
  const cell = doc.cells[`${i},${j}`];
  if (!cell) return null;
  return { i, j, score: cell.score, workspace: cell.workspace };
}
