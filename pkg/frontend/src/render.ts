// Top-down canvas rendering of the workspace and the live inference overlay.

import type { Scenario, Vec2 } from "./types";
import type { ViewState } from "./state";

export interface Camera {
  scale: number;
  offsetX: number;
  offsetY: number;
  height: number;
}

export function fitCamera(
  scenario: Scenario,
  width: number,
  height: number
): Camera {
  const { min, max } = scenario.workspace.bounds;
  const w = max[0] - min[0];
  const h = max[1] - min[1];
  const scale = Math.min((width - 20) / w, (height - 20) / h);
  return {
    scale,
    offsetX: 10 - min[0] * scale,
    offsetY: 10 - min[1] * scale,
    height,
  };
}

export function toScreen(cam: Camera, p: Vec2): Vec2 {
  // y grows upward in the workspace, downward on the canvas
  return [p[0] * cam.scale + cam.offsetX, cam.height - (p[1] * cam.scale + cam.offsetY)];
}

export function toWorld(cam: Camera, p: Vec2): Vec2 {
  return [
    (p[0] - cam.offsetX) / cam.scale,
    (cam.height - p[1] - cam.offsetY) / cam.scale,
  ];
}

function tracePolygon(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  vertices: Vec2[]
): void {
  ctx.beginPath();
  vertices.forEach((v, i) => {
    const [x, y] = toScreen(cam, v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.closePath();
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  state: ViewState
): void {
  const scenario = state.activeScenario();
  if (!scenario) return;
  const ws = scenario.workspace;
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);

  const [bx0, by0] = toScreen(cam, ws.bounds.min);
  const [bx1, by1] = toScreen(cam, ws.bounds.max);
  ctx.fillStyle = "#fafaf7";
  ctx.fillRect(bx0, by1, bx1 - bx0, by0 - by1);
  ctx.strokeStyle = "#333";
  ctx.strokeRect(bx0, by1, bx1 - bx0, by0 - by1);

  for (const poly of ws.fixed_obstacles) {
    tracePolygon(ctx, cam, poly.vertices);
    ctx.fillStyle = "#9a9a9a";
    ctx.fill();
    ctx.strokeStyle = "#5a5a5a";
    ctx.stroke();
  }
  // virtual barriers render exactly as the engine placed them
  for (const poly of ws.virtual_obstacles) {
    tracePolygon(ctx, cam, poly.vertices);
    ctx.fillStyle = "rgba(0, 220, 230, 0.45)";
    ctx.fill();
    ctx.strokeStyle = "#e02020";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.lineWidth = 1;
  }

  if (state.trail.length > 1) {
    ctx.beginPath();
    state.trail.forEach((p, i) => {
      const [x, y] = toScreen(cam, p);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.strokeStyle = "rgba(40, 90, 220, 0.55)";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.lineWidth = 1;
  }

  for (const item of ws.items) {
    const [x, y] = toScreen(cam, item.pos);
    const r = item.radius * cam.scale;
    ctx.beginPath();
    ctx.arc(x, y, Math.max(r, 4), 0, Math.PI * 2);
    const isEligible = state.eligible.includes(item.id);
    const isArgmax = state.lastBelief?.argmax === item.id;
    ctx.fillStyle = isArgmax ? "#ff9f1c" : isEligible ? "#ffd36b" : "#d8d8cf";
    ctx.fill();
    ctx.strokeStyle = "#444";
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(item.id, x, y - Math.max(r, 4) - 4);
  }

  const [sx, sy] = toScreen(cam, ws.start);
  ctx.fillStyle = "#1b9e4b";
  ctx.beginPath();
  ctx.moveTo(sx, sy - 7);
  ctx.lineTo(sx + 6, sy + 5);
  ctx.lineTo(sx - 6, sy + 5);
  ctx.closePath();
  ctx.fill();

  if (state.marker) {
    const [mx, my] = toScreen(cam, state.marker);
    ctx.beginPath();
    ctx.arc(mx, my, 7, 0, Math.PI * 2);
    ctx.fillStyle = state.committedGoal ? "#e02020" : "#2855dc";
    ctx.fill();
    ctx.strokeStyle = "#fff";
    ctx.stroke();
  }
}
