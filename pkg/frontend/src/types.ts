// Wire types shared with the engine API.

export type Vec2 = [number, number];

export interface PolygonSpec {
  vertices: Vec2[];
}

export interface ItemSpec {
  id: string;
  pos: Vec2;
  radius: number;
}

export interface WorkspaceSpec {
  bounds: { min: Vec2; max: Vec2 };
  start: Vec2;
  items: ItemSpec[];
  virtual_obstacles: PolygonSpec[];
  fixed_obstacles: PolygonSpec[];
  template: string;
}

export interface SubtaskSpec {
  id: string;
  goal_item: string;
  agent: string;
}

export interface Scenario {
  format_version: number;
  workspace: WorkspaceSpec;
  task: { subtasks: SubtaskSpec[]; precedence: [string, string][] };
  legibility: { beta: number; penalty_c: number; checkpoints: number[] };
  sim: { return_home: boolean; confidence_threshold: number };
}

export interface ScenarioListEntry {
  id: string;
  template: string;
}

export interface ArchiveCellSpec {
  score: number;
  features: [number, number];
  workspace: WorkspaceSpec;
}

export interface ArchiveDoc {
  format_version: number;
  descriptor: {
    min_distance_bins: number;
    ordering_cardinality: number;
  };
  cells: Record<string, ArchiveCellSpec>;
}

export interface BeliefMessage {
  type: "belief";
  entries: Record<string, number>;
  argmax: string;
  margin: number;
  committed: boolean;
  seq: number | null;
}

export interface StartedMessage {
  type: "started";
  scenario: string;
  eligible: string[];
  origin: Vec2;
  seq: number | null;
}

export interface SubtaskCompletedMessage {
  type: "subtask_completed";
  eligible: string[];
  origin: Vec2;
  seq: number | null;
}

export interface ErrorMessage {
  type: "error";
  message: string;
  seq: number | null;
}

export type ServerMessage =
  | BeliefMessage
  | StartedMessage
  | SubtaskCompletedMessage
  | ErrorMessage;
