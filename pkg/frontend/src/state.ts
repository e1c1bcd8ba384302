// View state: loaded scenario, condition toggle, belief history, event feed.

import type { BeliefMessage, Scenario, Vec2 } from "./types";

export type Condition = "baseline" | "optimized";

export interface FeedEvent {
  kind: "commit" | "replan" | "subtask" | "info";
  text: string;
}

const HISTORY_CAPACITY = 240;

export class ViewState {
  scenarioId: string | null = null;
  scenario: Scenario | null = null;
  optimizedScenario: Scenario | null = null;
  condition: Condition = "baseline";
  marker: Vec2 | null = null;
  trail: Vec2[] = [];
  eligible: string[] = [];
  completed: string[] = [];
  lastBelief: BeliefMessage | null = null;
  beliefHistory: BeliefMessage[] = [];
  events: FeedEvent[] = [];
  committedGoal: string | null = null;
  dragging = false;

  activeScenario(): Scenario | null {
    return this.condition === "optimized" && this.optimizedScenario
      ? this.optimizedScenario
      : this.scenario;
  }

  resetSession(origin: Vec2, eligible: string[]): void {
    this.marker = origin;
    this.trail = [origin];
    this.eligible = eligible;
    this.lastBelief = null;
    this.beliefHistory = [];
    this.committedGoal = null;
  }

  pushBelief(message: BeliefMessage): FeedEvent[] {
    const fresh: FeedEvent[] = [];
    const previous = this.lastBelief;
    this.lastBelief = message;
    this.beliefHistory.push(message);
    if (this.beliefHistory.length > HISTORY_CAPACITY) {
      this.beliefHistory.shift();
    }
    if (message.committed && this.committedGoal === null) {
      this.committedGoal = message.argmax;
      fresh.push({ kind: "commit", text: `committed to ${message.argmax}` });
    } else if (
      this.committedGoal !== null &&
      previous !== null &&
      message.argmax !== previous.argmax
    ) {
      fresh.push({
        kind: "replan",
        text: `argmax changed ${previous.argmax} -> ${message.argmax}`,
      });
    }
    for (const e of fresh) this.events.unshift(e);
    this.events = this.events.slice(0, 50);
    return fresh;
  }
}

/** Belief probabilities sorted by goal id for stable bar ordering. */
export function sortedEntries(
  entries: Record<string, number>
): [string, number][] {
  return Object.entries(entries).sort((a, b) => a[0].localeCompare(b[0]));
}
