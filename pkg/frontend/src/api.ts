// REST + WebSocket client for the engine API.

import type {
  ArchiveDoc,
  Scenario,
  ScenarioListEntry,
  ServerMessage,
  Vec2,
} from "./types";

export function apiBase(): string {
  const params = new URLSearchParams(location.search);
  return params.get("api") ?? `${location.protocol}//${location.host}`;
}

export async function fetchScenarios(base: string): Promise<ScenarioListEntry[]> {
  const res = await fetch(`${base}/api/scenarios`);
  if (!res.ok) throw new Error(`scenario list failed: ${res.status}`);
  return (await res.json()).scenarios;
}

export async function fetchScenario(base: string, id: string): Promise<Scenario> {
  const res = await fetch(`${base}/api/scenarios/${id}`);
  if (!res.ok) throw new Error(`scenario ${id} failed: ${res.status}`);
  return await res.json();
}

export async function fetchRunArchive(
  base: string,
  runId: string
): Promise<ArchiveDoc> {
  const res = await fetch(`${base}/api/runs/${runId}/archive`);
  if (!res.ok) throw new Error(`archive ${runId} failed: ${res.status}`);
  return await res.json();
}

export interface InferenceHandlers {
  onMessage: (msg: ServerMessage) => void;
  onStatus: (connected: boolean) => void;
}

/** One inference channel; reconnects automatically and restarts the session. */
export class InferenceChannel {
  private ws: WebSocket | null = null;
  private seq = 0;
  private closed = false;
  private scenarioId: string | null = null;
  private completed: string[] = [];

  constructor(private base: string, private handlers: InferenceHandlers) {}

  start(scenarioId: string, completed: string[]): void {
    this.scenarioId = scenarioId;
    this.completed = completed;
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.sendStart();
    } else {
      this.connect();
    }
  }

  private connect(): void {
    const url = this.base.replace(/^http/, "ws") + "/api/inference";
    this.ws = new WebSocket(url);
    this.ws.onopen = () => {
      this.handlers.onStatus(true);
      this.sendStart();
    };
    this.ws.onmessage = (ev) => {
      try {
        this.handlers.onMessage(JSON.parse(ev.data));
      } catch {
        // malformed frames are dropped; the server keeps the session alive
      }
    };
    this.ws.onclose = () => {
      this.handlers.onStatus(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), 800);
      }
    };
  }

  private sendStart(): void {
    if (!this.scenarioId || !this.ws) return;
    this.ws.send(
      JSON.stringify({
        type: "start",
        scenario: this.scenarioId,
        subtask_state: { completed: this.completed },
        seq: this.seq++,
      })
    );
  }

  sendPoint(p: Vec2): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(
        JSON.stringify({ type: "point", p: [p[0], p[1]], seq: this.seq++ })
      );
    }
  }

  completeSubtask(id: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(
        JSON.stringify({ type: "complete_subtask", id, seq: this.seq++ })
      );
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
