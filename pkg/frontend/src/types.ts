/**
 * Mirrors of the service's versioned JSON schemas (see docs/api).
 * The board never computes model math: every number it displays
 * originates from one of these response fields.
 */

export const SCHEMA_VERSION = 1;

export type Team = "attacking" | "defending" | "none";
export type OpponentMode = "recorded" | "replayed" | "reactive";
export type BallMode = "predictive" | "conditional";

export type ObjectiveKind = "none" | "rule" | "composite" | "dsl" | "value" | "preset";

export interface ObjectiveItem {
  kind: "rule" | "dsl" | "value" | "preset";
  id?: string;
  name?: string;
  program?: string;
  weight: number;
}

export interface ObjectiveSpec {
  kind: ObjectiveKind;
  id?: string;
  name?: string;
  program?: string;
  items?: ObjectiveItem[];
}

export interface GenerateRequest {
  schema_version: number;
  scenario_id: string;
  ball_mode: BallMode;
  n_samples: number;
  seed: number;
  objective: ObjectiveSpec;
  guided_team: Team;
  guidance_scale: number | null;
  opponent_mode: OpponentMode;
  include_pitch_control: boolean;
}

export interface Metrics {
  ade: number;
  fde: number;
  mr: number;
  jade: number;
  jfde: number;
  jmr: number;
}

export interface PitchControlGrids {
  grid_x: number;
  grid_y: number;
  samples: number[][][];
  reference: number[][];
}

export interface GenerateResponse {
  schema_version: number;
  scenario_id: string | null;
  trajectories: number[][][][]; // N x 23 x 64 x 2 meters
  roles: number[];
  context_len: number;
  guidance_scores: number[] | null;
  reference_score: number | null;
  metrics: Metrics | null;
  pitch_control: PitchControlGrids | null;
}

export interface ScenarioSummary {
  id: string;
  action: string;
  split: string;
  game_id: number;
  event_id: number;
  valid_frames: number;
}

export interface Scenario {
  id: string;
  action: string;
  split: string;
  event_metadata: Record<string, number>;
  global_feature: Record<string, number>;
  time_to_event: number;
  action_destination: number[];
  context_positions: number[][][]; // 10 x 23 x 2, record agent order
  truth_trajectories: number[][][]; // 23 x 64 x 2, window agent order
  validity: number[][]; // 23 x 64
  roles: number[];
  context_len: number;
}

export interface PresetInfo {
  name: string;
  kind: string;
  description: string;
  default_scale: number;
}

export interface DslDiagnostics {
  message: string;
  line: number;
  col: number;
}
