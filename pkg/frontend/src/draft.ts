/**
 * The objective draft an analyst edits, and its exact serialization into
 * a GenerateRequest.  composeRequest builds the payload field-by-field in
 * the schema's canonical order so the serialized form is byte-stable.
 */

import type {
  BallMode,
  GenerateRequest,
  ObjectiveItem,
  ObjectiveSpec,
  OpponentMode,
  Team,
} from "./types.js";
import { SCHEMA_VERSION } from "./types.js";

export type DraftKind = "none" | "rules" | "dsl" | "value";

export interface RuleWeight {
  id: string;
  weight: number;
  enabled: boolean;
}

export interface ObjectiveDraft {
  scenarioId: string;
  kind: DraftKind;
  rules: RuleWeight[];
  dslProgram: string;
  guidedTeam: Team;
  guidanceScale: number | null; // null -> server-side default
  opponentMode: OpponentMode;
  ballMode: BallMode;
  nSamples: number;
  seed: number;
  includePitchControl: boolean;
}

export const DEFAULT_RULES: RuleWeight[] = [
  { id: "support", weight: 1.0, enabled: false },
  { id: "compact", weight: 1.0, enabled: false },
  { id: "spread", weight: 1.0, enabled: false },
  { id: "passing_angle_spread", weight: 1.0, enabled: false },
  { id: "zone14", weight: 1.0, enabled: false },
  { id: "deep_defending", weight: 1.0, enabled: false },
  { id: "pass_lane_block", weight: 1.0, enabled: false },
  { id: "pcv", weight: 1.0, enabled: false },
];

export function emptyDraft(scenarioId: string): ObjectiveDraft {
  return {
    scenarioId,
    kind: "none",
    rules: DEFAULT_RULES.map((r) => ({ ...r })),
    dslProgram: "",
    guidedTeam: "none",
    guidanceScale: null,
    opponentMode: "recorded",
    ballMode: "predictive",
    nSamples: 20,
    seed: 0,
    includePitchControl: false,
  };
}

export interface ValidationIssue {
  field: string;
  message: string;
}

/** Client-side range checks; the server re-validates everything. */
export function validateDraft(draft: ObjectiveDraft): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  if (draft.nSamples < 1 || draft.nSamples > 64) {
    issues.push({ field: "nSamples", message: "samples must be between 1 and 64" });
  }
  if (draft.guidanceScale !== null && draft.guidanceScale < 0) {
    issues.push({ field: "guidanceScale", message: "guidance scale must be >= 0" });
  }
  if (draft.kind !== "none" && draft.guidedTeam === "none") {
    issues.push({ field: "guidedTeam", message: "pick a team to guide" });
  }
  if (draft.kind === "rules" && !draft.rules.some((r) => r.enabled)) {
    issues.push({ field: "rules", message: "enable at least one rule" });
  }
  if (draft.kind === "dsl" && draft.dslProgram.trim() === "") {
    issues.push({ field: "dslProgram", message: "write a guidance program" });
  }
  for (const rule of draft.rules) {
    if (rule.enabled && rule.weight < 0) {
      issues.push({ field: `rules.${rule.id}`, message: "weights must be >= 0" });
    }
  }
  return issues;
}

function objectiveFromDraft(draft: ObjectiveDraft): ObjectiveSpec {
  if (draft.kind === "none") return { kind: "none" };
  if (draft.kind === "dsl") return { kind: "dsl", program: draft.dslProgram };
  if (draft.kind === "value") return { kind: "value" };
  const items: ObjectiveItem[] = draft.rules
    .filter((r) => r.enabled)
    .map((r) => ({ kind: "rule", id: r.id, weight: r.weight }));
  if (items.length === 1 && items[0].weight === 1.0) {
    return { kind: "rule", id: items[0].id };
  }
  return { kind: "composite", items };
}

/**
 * Serialize the draft into the versioned request payload.  Field order is
 * fixed; `JSON.stringify(composeRequest(d))` is byte-stable for a given
 * draft and matches the recorded schema fixtures.
 */
export function composeRequest(draft: ObjectiveDraft): GenerateRequest {
  return {
    schema_version: SCHEMA_VERSION,
    scenario_id: draft.scenarioId,
    ball_mode: draft.ballMode,
    n_samples: draft.nSamples,
    seed: draft.seed,
    objective: objectiveFromDraft(draft),
    guided_team: draft.guidedTeam,
    guidance_scale: draft.guidanceScale,
    opponent_mode: draft.opponentMode,
    include_pitch_control: draft.includePitchControl,
  };
}

/** Round-trip codec used to persist drafts; decode(encode(d)) equals d. */
export function encodeDraft(draft: ObjectiveDraft): string {
  return JSON.stringify(draft);
}

export function decodeDraft(text: string): ObjectiveDraft {
  const raw = JSON.parse(text) as ObjectiveDraft;
  return {
    ...emptyDraft(raw.scenarioId),
    ...raw,
    rules: raw.rules.map((r) => ({ ...r })),
  };
}

/** Pre-fill a draft from a previously sent request ("iterate" action). */
export function draftFromRequest(req: GenerateRequest): ObjectiveDraft {
  const draft = emptyDraft(req.scenario_id);
  draft.ballMode = req.ball_mode;
  draft.nSamples = req.n_samples;
  draft.seed = req.seed;
  draft.guidedTeam = req.guided_team;
  draft.guidanceScale = req.guidance_scale;
  draft.opponentMode = req.opponent_mode;
  draft.includePitchControl = req.include_pitch_control;
  const obj = req.objective;
  if (obj.kind === "dsl") {
    draft.kind = "dsl";
    draft.dslProgram = obj.program ?? "";
  } else if (obj.kind === "value") {
    draft.kind = "value";
  } else if (obj.kind === "rule") {
    draft.kind = "rules";
    draft.rules = draft.rules.map((r) => (r.id === obj.id ? { ...r, enabled: true, weight: 1.0 } : r));
  } else if (obj.kind === "composite") {
    draft.kind = "rules";
    const items = obj.items ?? [];
    draft.rules = draft.rules.map((r) => {
      const item = items.find((i) => i.id === r.id);
      return item ? { ...r, enabled: true, weight: item.weight } : r;
    });
  }
  return draft;
}
