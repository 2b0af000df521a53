import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { CompareView, RequestGate } from "../src/compare.js";
import { composeRequest } from "../src/draft.js";
import type { GenerateRequest, GenerateResponse } from "../src/types.js";

const request = JSON.parse(
  readFileSync(new URL("../fixtures/generate_request.json", import.meta.url), "utf-8")
) as GenerateRequest;
const response = JSON.parse(
  readFileSync(new URL("../fixtures/generate_response.json", import.meta.url), "utf-8")
) as GenerateResponse;

describe("CompareView", () => {
  it("exposes all 20 returned samples", () => {
    const view = new CompareView(request, response);
    expect(view.sampleCount).toBe(20);
    expect(view.select(19)).toBe(19);
    expect(() => view.select(20)).toThrow(/out of range/);
  });

  it("shows score fields verbatim from the response", () => {
    const view = new CompareView(request, response);
    const panel = view.scorePanel();
    expect(panel.sampleScores).toEqual(response.guidance_scores);
    expect(panel.referenceScore).toBe(response.reference_score);
    view.select(3);
    expect(view.selectedScore()).toBe(response.guidance_scores?.[3]);
  });

  it("shows metric fields verbatim when truth exists", () => {
    const view = new CompareView(request, response);
    const metrics = view.scorePanel().metrics;
    expect(metrics).not.toBeNull();
    const byLabel = Object.fromEntries(metrics!.map((m) => [m.label, m.value]));
    expect(byLabel.JADE).toBe(response.metrics?.jade);
    expect(byLabel.MR).toBeUndefined(); // labeled as MR%
    expect(byLabel["MR%"]).toBe(response.metrics?.mr);
  });

  it("iterate pre-fills a draft that reproduces the request", () => {
    const view = new CompareView(request, response);
    const draft = view.iterate();
    expect(JSON.stringify(composeRequest(draft))).toBe(JSON.stringify(request));
  });
});

describe("RequestGate", () => {
  it("discards stale responses by ticket", () => {
    const gate = new RequestGate();
    const first = gate.next();
    const second = gate.next();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });
});
