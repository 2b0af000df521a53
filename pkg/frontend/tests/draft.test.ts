import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { composeRequest, decodeDraft, DEFAULT_RULES, draftFromRequest, emptyDraft, encodeDraft, validateDraft } from "../src/draft.js";
import type { GenerateRequest } from "../src/types.js";

const fixtureRequest = readFileSync(new URL("../fixtures/generate_request.json", import.meta.url), "utf-8").trim();
const fixtureScenarioId = (JSON.parse(fixtureRequest) as GenerateRequest).scenario_id;

function fixtureDraft() {
  const draft = emptyDraft(fixtureScenarioId);
  draft.kind = "rules";
  draft.rules = draft.rules.map((r) =>
    r.id === "support" ? { ...r, enabled: true, weight: 1.0 } : r.id === "zone14" ? { ...r, enabled: true, weight: 0.5 } : r
  );
  draft.guidedTeam = "attacking";
  draft.nSamples = 20;
  draft.seed = 7;
  return draft;
}

describe("composeRequest", () => {
  it("serializes byte-for-byte against the recorded schema fixture", () => {
    const body = JSON.stringify(composeRequest(fixtureDraft()));
    expect(body).toBe(fixtureRequest);
  });

  it("keeps composite items in rule-panel order with their weights", () => {
    const req = composeRequest(fixtureDraft());
    expect(req.objective.kind).toBe("composite");
    expect(req.objective.items).toEqual([
      { kind: "rule", id: "support", weight: 1.0 },
      { kind: "rule", id: "zone14", weight: 0.5 },
    ]);
  });

  it("collapses a single full-weight rule to kind=rule", () => {
    const draft = emptyDraft("g1-e2");
    draft.kind = "rules";
    draft.guidedTeam = "defending";
    draft.rules = draft.rules.map((r) => (r.id === "compact" ? { ...r, enabled: true } : r));
    const req = composeRequest(draft);
    expect(req.objective).toEqual({ kind: "rule", id: "compact" });
  });

  it("passes the DSL buffer through verbatim", () => {
    const draft = emptyDraft("g1-e3");
    draft.kind = "dsl";
    draft.guidedTeam = "attacking";
    draft.dslProgram = "  mean(x(team_pos), all)  ";
    expect(composeRequest(draft).objective.program).toBe("  mean(x(team_pos), all)  ");
  });

  it("keeps the objective kind with scale 0 (server treats it as unguided)", () => {
    const draft = fixtureDraft();
    draft.guidanceScale = 0;
    const req = composeRequest(draft);
    expect(req.objective.kind).toBe("composite");
    expect(req.guidance_scale).toBe(0);
  });
});

describe("validateDraft", () => {
  it("accepts the fixture draft", () => {
    expect(validateDraft(fixtureDraft())).toEqual([]);
  });

  it("rejects out-of-range values with field names", () => {
    const draft = fixtureDraft();
    draft.nSamples = 0;
    draft.guidanceScale = -1;
    const fields = validateDraft(draft).map((i) => i.field);
    expect(fields).toContain("nSamples");
    expect(fields).toContain("guidanceScale");
  });

  it("requires a guided team when an objective is set", () => {
    const draft = fixtureDraft();
    draft.guidedTeam = "none";
    expect(validateDraft(draft).map((i) => i.field)).toContain("guidedTeam");
  });
});

describe("draft codec", () => {
  it("decode(encode(draft)) equals the draft", () => {
    const draft = fixtureDraft();
    draft.dslProgram = "relu(x(team_pos)) * 2.0";
    draft.includePitchControl = true;
    expect(decodeDraft(encodeDraft(draft))).toEqual(draft);
  });

  it("covers every catalog rule in the panel", () => {
    expect(DEFAULT_RULES.map((r) => r.id)).toEqual([
      "support",
      "compact",
      "spread",
      "passing_angle_spread",
      "zone14",
      "deep_defending",
      "pass_lane_block",
      "pcv",
    ]);
  });
});

describe("iterate", () => {
  it("round-trips the fixture request into an equivalent draft", () => {
    const req = JSON.parse(fixtureRequest) as GenerateRequest;
    const draft = draftFromRequest(req);
    expect(JSON.stringify(composeRequest(draft))).toBe(fixtureRequest);
  });
});
