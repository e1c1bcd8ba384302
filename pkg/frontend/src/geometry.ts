// Client-side collision for the draggable human marker. The barriers the
// engine places must physically stop the marker, not just display.

import type { PolygonSpec, Vec2, WorkspaceSpec } from "./types";

export function pointInPolygon(poly: PolygonSpec, p: Vec2, pad = 0): boolean {
  const vs = poly.vertices;
  const n = vs.length;
  if (pad > 0) {
    return polygonDistance(poly, p) <= pad;
  }
  for (let i = 0; i < n; i++) {
    const a = vs[i];
    const b = vs[(i + 1) % n];
    if ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0) {
      return false;
    }
  }
  return true;
}

export function polygonDistance(poly: PolygonSpec, p: Vec2): number {
  if (pointInPolygon(poly, p)) return 0;
  let best = Infinity;
  const vs = poly.vertices;
  for (let i = 0; i < vs.length; i++) {
    const a = vs[i];
    const b = vs[(i + 1) % vs.length];
    const dx = b[0] - a[0];
    const dy = b[1] - a[1];
    const L2 = dx * dx + dy * dy;
    let t = L2 > 0 ? ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / L2 : 0;
    t = Math.max(0, Math.min(1, t));
    const qx = a[0] + t * dx;
    const qy = a[1] + t * dy;
    best = Math.min(best, Math.hypot(p[0] - qx, p[1] - qy));
  }
  return best;
}

export function insideBounds(ws: WorkspaceSpec, p: Vec2): boolean {
  return (
    p[0] >= ws.bounds.min[0] &&
    p[0] <= ws.bounds.max[0] &&
    p[1] >= ws.bounds.min[1] &&
    p[1] <= ws.bounds.max[1]
  );
}

export function blockedAt(ws: WorkspaceSpec, p: Vec2): boolean {
  if (!insideBounds(ws, p)) return true;
  for (const poly of ws.virtual_obstacles) {
    if (pointInPolygon(poly, p)) return true;
  }
  for (const poly of ws.fixed_obstacles) {
    if (pointInPolygon(poly, p)) return true;
  }
  return false;
}

/** Last free point along from->to, sampled finely; keeps the marker out of
 * obstacles while letting it slide up to the boundary. */
export function clampMove(ws: WorkspaceSpec, from: Vec2, to: Vec2): Vec2 {
  if (!blockedAt(ws, to)) return to;
  const steps = 24;
  let best = from;
  for (let i = 1; i <= steps; i++) {
    const t = i / steps;
    const p: Vec2 = [
      from[0] + t * (to[0] - from[0]),
      from[1] + t * (to[1] - from[1]),
    ];
    if (blockedAt(ws, p)) break;
    best = p;
  }
  return best;
}
