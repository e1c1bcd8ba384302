// Per-goal probability bars; renders server beliefs unmodified.

import type { BeliefMessage } from "./types";
import { sortedEntries } from "./state";

export function renderBars(
  root: HTMLElement,
  belief: BeliefMessage | null,
  threshold: number
): void {
  if (!belief) {
    root.innerHTML = '<div class="muted">move the marker to see beliefs</div>';
    return;
  }
  const rows = sortedEntries(belief.entries).map(([goal, p]) => {
    const pct = (p * 100).toFixed(1);
    const isTop = goal === belief.argmax;
    const hot = isTop && p >= threshold;
    return `
      <div class="bar-row">
        <div class="bar-label${isTop ? " top" : ""}">${goal}</div>
        <div class="bar-track">
          <div class="bar-fill${hot ? " hot" : ""}" style="width:${pct}%"></div>
          <div class="bar-threshold" style="left:${threshold * 100}%"></div>
        </div>
        <div class="bar-value">${pct}%</div>
      </div>`;
  });
  const badge = belief.committed
    ? `<div class="committed-badge">committed: ${belief.argmax}</div>`
    : `<div class="margin-note">margin ${belief.margin.toFixed(3)}</div>`;
  root.innerHTML = rows.join("") + badge;
}
