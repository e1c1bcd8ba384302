// Playground wiring: scenario picker, draggable human marker streaming into
// the inference channel, belief bars, event feed, and the archive explorer.

import {
  InferenceChannel,
  apiBase,
  fetchRunArchive,
  fetchScenario,
  fetchScenarios,
} from "./api";
import { renderBars } from "./bars";
import { clampMove } from "./geometry";
import { cellAt, drawHeatmap } from "./heatmap";
import { Camera, drawScene, fitCamera, toWorld } from "./render";
import { Condition, ViewState } from "./state";
import type { ArchiveDoc, Scenario, ServerMessage, Vec2 } from "./types";

const SAMPLE_INTERVAL_MS = 50; // 20 Hz point sampling while dragging

const canvas = document.getElementById("workspace") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const barsRoot = document.getElementById("bars") as HTMLDivElement;
const feedRoot = document.getElementById("feed") as HTMLDivElement;
const scenarioSelect = document.getElementById("scenario") as HTMLSelectElement;
const conditionToggle = document.getElementById("condition") as HTMLSelectElement;
const subtaskList = document.getElementById("subtasks") as HTMLDivElement;
const statusBanner = document.getElementById("status") as HTMLDivElement;
const runInput = document.getElementById("run-id") as HTMLInputElement;
const loadRunButton = document.getElementById("load-run") as HTMLButtonElement;
const heatmapCanvas = document.getElementById("heatmap") as HTMLCanvasElement;
const heatmapCtx = heatmapCanvas.getContext("2d")!;

const base = apiBase();
const state = new ViewState();
let camera: Camera | null = null;
let archive: ArchiveDoc | null = null;
let lastSample = 0;

const channel = new InferenceChannel(base, {
  onMessage: handleMessage,
  onStatus: (connected) => {
    statusBanner.textContent = connected ? "" : "connection lost, reconnecting";
    statusBanner.className = connected ? "status ok" : "status bad";
    if (connected && state.scenarioId) {
      // session restarted by the channel; reset the local trail
      state.completed = [];
    }
  },
});

function handleMessage(msg: ServerMessage): void {
  if (msg.type === "started" || msg.type === "subtask_completed") {
    state.resetSession(msg.origin, msg.eligible);
    renderSubtasks();
  } else if (msg.type === "belief") {
    const events = state.pushBelief(msg);
    if (events.length) renderFeed();
  } else if (msg.type === "error") {
    pushInfo(`server: ${msg.message}`);
  }
  const scenario = state.activeScenario();
  renderBars(barsRoot, state.lastBelief, scenario?.sim.confidence_threshold ?? 0.8);
  redraw();
}

function pushInfo(text: string): void {
  state.events.unshift({ kind: "info", text });
  state.events = state.events.slice(0, 50);
  renderFeed();
}

function renderFeed(): void {
  feedRoot.innerHTML = state.events
    .map((e) => `<div class="event ${e.kind}">${e.text}</div>`)
    .join("");
}

function renderSubtasks(): void {
  const scenario = state.activeScenario();
  if (!scenario) return;
  subtaskList.innerHTML = scenario.task.subtasks
    .map((t) => {
      const done = state.completed.includes(t.id);
      const eligible = state.eligible.includes(t.goal_item);
      return `<button class="subtask${done ? " done" : ""}${
        eligible ? " eligible" : ""
      }" data-id="${t.id}" ${done ? "disabled" : ""}>${t.id}</button>`;
    })
    .join("");
  subtaskList.querySelectorAll("button").forEach((btn) => {
    btn.addEventListener("click", () => {
      const id = btn.getAttribute("data-id")!;
      state.completed.push(id);
      channel.completeSubtask(id);
      pushInfo(`subtask ${id} completed`);
    });
  });
}

function redraw(): void {
  const scenario = state.activeScenario();
  if (!scenario || !camera) return;
  drawScene(ctx, camera, state);
}

function startSession(): void {
  if (!state.scenarioId) return;
  state.completed = [];
  channel.start(currentChannelScenarioId(), []);
}

function currentChannelScenarioId(): string {
  // the optimized condition streams against the uploaded optimized copy
  return state.condition === "optimized" && state.optimizedScenario
    ? `${state.scenarioId}#optimized`
    : state.scenarioId!;
}

async function loadScenario(id: string): Promise<void> {
  state.scenarioId = id;
  state.scenario = await fetchScenario(base, id);
  state.optimizedScenario = null;
  state.condition = "baseline";
  conditionToggle.value = "baseline";
  camera = fitCamera(state.scenario, canvas.width, canvas.height);
  startSession();
  redraw();
}

async function uploadOptimized(scenario: Scenario): Promise<void> {
  const id = `${state.scenarioId}#optimized`;
  await fetch(`${base}/api/scenarios`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ id, scenario }),
  });
}

canvas.addEventListener("mousedown", (ev) => {
  state.dragging = true;
  sampleDrag(ev);
});
canvas.addEventListener("mousemove", (ev) => {
  if (state.dragging) sampleDrag(ev);
});
window.addEventListener("mouseup", () => {
  state.dragging = false;
});

function sampleDrag(ev: MouseEvent): void {
  const scenario = state.activeScenario();
  if (!scenario || !camera || !state.marker) return;
  const now = performance.now();
  if (now - lastSample < SAMPLE_INTERVAL_MS) return;
  lastSample = now;
  const rect = canvas.getBoundingClientRect();
  const target = toWorld(camera, [ev.clientX - rect.left, ev.clientY - rect.top]);
  // barriers physically constrain the marker; the server stays authoritative
  const next = clampMove(scenario.workspace, state.marker, target as Vec2);
  if (
    Math.hypot(next[0] - state.marker[0], next[1] - state.marker[1]) < 1e-9
  ) {
    return;
  }
  state.marker = next;
  state.trail.push(next);
  channel.sendPoint(next);
  redraw();
}

scenarioSelect.addEventListener("change", () => {
  void loadScenario(scenarioSelect.value);
});

conditionToggle.addEventListener("change", () => {
  state.condition = conditionToggle.value as Condition;
  if (state.condition === "optimized" && !state.optimizedScenario) {
    pushInfo("no optimized workspace loaded yet; pick an archive cell");
    state.condition = "baseline";
    conditionToggle.value = "baseline";
    return;
  }
  const scenario = state.activeScenario()!;
  camera = fitCamera(scenario, canvas.width, canvas.height);
  startSession();
  redraw();
});

loadRunButton.addEventListener("click", async () => {
  try {
    archive = await fetchRunArchive(base, runInput.value.trim());
    drawHeatmap(heatmapCtx, archive);
    pushInfo(`archive loaded: ${Object.keys(archive.cells).length} elites`);
  } catch (err) {
    pushInfo(String(err));
  }
});

heatmapCanvas.addEventListener("click", async (ev) => {
  if (!archive || !state.scenario) return;
  const rect = heatmapCanvas.getBoundingClientRect();
  const cell = cellAt(
    archive,
    heatmapCanvas.width,
    heatmapCanvas.height,
    ev.clientX - rect.left,
    ev.clientY - rect.top
  );
  if (!cell) return;
  const optimized: Scenario = JSON.parse(JSON.stringify(state.scenario));
  optimized.workspace = cell.workspace;
  state.optimizedScenario = optimized;
  await uploadOptimized(optimized);
  state.condition = "optimized";
  conditionToggle.value = "optimized";
  camera = fitCamera(optimized, canvas.width, canvas.height);
  startSession();
  pushInfo(
    `loaded elite (${cell.i},${cell.j}) score ${cell.score.toFixed(3)} as optimized`
  );
  redraw();
});

async function boot(): Promise<void> {
  try {
    const scenarios = await fetchScenarios(base);
    scenarioSelect.innerHTML = scenarios
      .map((s) => `<option value="${s.id}">${s.id} (${s.template})</option>`)
      .join("");
    if (scenarios.length) {
      await loadScenario(scenarios[0].id);
    } else {
      pushInfo("no scenarios on the server");
    }
  } catch (err) {
    statusBanner.textContent = `cannot reach the engine API at ${base}`;
    statusBanner.className = "status bad";
    console.error(err);
  }
}

void boot();
