import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { buildScene, sceneFromSample, sceneFromScenario } from "../src/scene.js";
import type { GenerateResponse, Scenario } from "../src/types.js";

const scenario = JSON.parse(
  readFileSync(new URL("../fixtures/scenario.json", import.meta.url), "utf-8")
) as Scenario;
const response = JSON.parse(
  readFileSync(new URL("../fixtures/generate_response.json", import.meta.url), "utf-8")
) as GenerateResponse;

describe("sceneFromScenario", () => {
  it("renders all 23 agents at frame 0", () => {
    const scene = sceneFromScenario(scenario, 0);
    expect(scene.markers).toHaveLength(23);
    const roles = scene.markers.map((m) => m.role);
    expect(roles.filter((r) => r === "attacker")).toHaveLength(11);
    expect(roles.filter((r) => r === "defender")).toHaveLength(11);
    expect(roles.filter((r) => r === "ball")).toHaveLength(1);
  });

  it("marks context frames as observed and later frames as generated", () => {
    expect(sceneFromScenario(scenario, 3).markers.every((m) => m.observed)).toBe(true);
    expect(sceneFromScenario(scenario, 30).markers.every((m) => !m.observed)).toBe(true);
  });

  it("clamps missing frames to the last valid one", () => {
    const last = sceneFromScenario(scenario, 63);
    const beyond = sceneFromScenario(scenario, 500);
    expect(beyond.frame).toBe(63);
    expect(beyond.markers).toEqual(last.markers);
  });

  it("positions stay inside the pitch bounds (with flight slack)", () => {
    for (const frame of [0, 9, 20, 63]) {
      for (const m of sceneFromScenario(scenario, frame).markers) {
        expect(m.x).toBeGreaterThanOrEqual(-5);
        expect(m.x).toBeLessThanOrEqual(110);
        expect(m.y).toBeGreaterThanOrEqual(-5);
        expect(m.y).toBeLessThanOrEqual(73);
      }
    }
  });
});

describe("sceneFromSample", () => {
  it("renders a generated sample with 23 markers and trails", () => {
    const scene = sceneFromSample(response, 0, 40);
    expect(scene.markers).toHaveLength(23);
    expect(scene.trails).toHaveLength(23);
    expect(scene.trails[0].points.length).toBeGreaterThan(1);
  });

  it("only attaches a heatmap when the response carries grids", () => {
    expect(sceneFromSample(response, 0, 10).heatmap).toBeNull();
    const withGrids: GenerateResponse = {
      ...response,
      pitch_control: {
        grid_x: 2,
        grid_y: 2,
        samples: response.trajectories.map(() => [
          [0.25, 0.75],
          [0.5, 0.5],
        ]),
        reference: [
          [0.1, 0.9],
          [0.4, 0.6],
        ],
      },
    };
    const scene = sceneFromSample(withGrids, 1, 10);
    expect(scene.heatmap).not.toBeNull();
    expect(scene.heatmap?.values).toEqual([
      [0.25, 0.75],
      [0.5, 0.5],
    ]);
  });

  it("rejects out-of-range samples", () => {
    expect(() => sceneFromSample(response, 99, 0)).toThrow(/out of range/);
  });
});

describe("buildScene", () => {
  it("limits trail length", () => {
    const scene = buildScene(scenario.truth_trajectories, scenario.roles, 10, 30, { trailLength: 5 });
    expect(Math.max(...scene.trails.map((t) => t.points.length))).toBeLessThanOrEqual(6);
  });
});
