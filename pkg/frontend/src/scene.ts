/**
 * Pure scene construction: scenario/response + frame index -> draw list.
 * Rendering to canvas is a thin painter over the scene model, so tests
 * can assert on markers and trails without a real canvas.
 */

import type { GenerateResponse, Scenario } from "./types.js";

export const PITCH_LENGTH = 105;
export const PITCH_WIDTH = 68;

export interface Marker {
  x: number;
  y: number;
  role: "attacker" | "defender" | "ball";
  agent: number;
  observed: boolean; // frame inside the observed context
}

export interface Trail {
  agent: number;
  role: "attacker" | "defender" | "ball";
  points: { x: number; y: number }[];
  observed: boolean;
}

export interface HeatmapLayer {
  gridX: number;
  gridY: number;
  values: number[][]; // attacking control in [0, 1]
}

export interface Scene {
  frame: number;
  markers: Marker[];
  trails: Trail[];
  heatmap: HeatmapLayer | null;
}

const ROLE_NAMES = ["attacker", "defender", "ball"] as const;

function roleOf(roles: number[], agent: number): (typeof ROLE_NAMES)[number] {
  return ROLE_NAMES[roles[agent]] ?? "defender";
}

export interface SceneOptions {
  trailLength?: number;
  heatmap?: HeatmapLayer | null;
}

/**
 * Build the scene for one frame of a 23 x 64 x 2 trajectory tensor.
 * Frames beyond the last one clamp to the final frame.
 */
export function buildScene(
  trajectories: number[][][],
  roles: number[],
  contextLen: number,
  frame: number,
  options: SceneOptions = {}
): Scene {
  const horizon = trajectories[0]?.length ?? 0;
  if (horizon === 0) throw new Error("empty trajectories");
  const f = Math.max(0, Math.min(frame, horizon - 1));
  const trailLength = options.trailLength ?? 12;

  const markers: Marker[] = trajectories.map((agentPath, agent) => ({
    x: agentPath[f][0],
    y: agentPath[f][1],
    role: roleOf(roles, agent),
    agent,
    observed: f < contextLen,
  }));

  const trails: Trail[] = trajectories.map((agentPath, agent) => {
    const start = Math.max(0, f - trailLength);
    return {
      agent,
      role: roleOf(roles, agent),
      points: agentPath.slice(start, f + 1).map(([x, y]) => ({ x, y })),
      observed: f < contextLen,
    };
  });

  return { frame: f, markers, trails, heatmap: options.heatmap ?? null };
}

export function sceneFromScenario(scenario: Scenario, frame: number, options: SceneOptions = {}): Scene {
  return buildScene(scenario.truth_trajectories, scenario.roles, scenario.context_len, frame, options);
}

export function sceneFromSample(
  response: GenerateResponse,
  sampleIndex: number,
  frame: number,
  options: SceneOptions = {}
): Scene {
  const sample = response.trajectories[sampleIndex];
  if (!sample) throw new Error(`sample ${sampleIndex} out of range`);
  const heatmap =
    options.heatmap !== undefined
      ? options.heatmap
      : response.pitch_control
        ? {
            gridX: response.pitch_control.grid_x,
            gridY: response.pitch_control.grid_y,
            values: response.pitch_control.samples[sampleIndex],
          }
        : null;
  return buildScene(sample, response.roles, response.context_len, frame, { ...options, heatmap });
}

/** Colors follow the usual convention: attackers red, defenders blue, ball black. */
export const ROLE_COLORS: Record<string, string> = {
  attacker: "#d33131",
  defender: "#2b6fd3",
  ball: "#111111",
};

export function drawScene(ctx: CanvasRenderingContext2D, scene: Scene, width: number, height: number): void {
  const sx = width / PITCH_LENGTH;
  const sy = height / PITCH_WIDTH;
  ctx.clearRect(0, 0, width, height);

  if (scene.heatmap) {
    const { gridX, gridY, values } = scene.heatmap;
    const cw = width / gridX;
    const ch = height / gridY;
    for (let i = 0; i < gridX; i++) {
      for (let j = 0; j < gridY; j++) {
        const v = values[i][j];
        ctx.fillStyle = `rgba(${Math.round(211 * v + 43 * (1 - v))}, 60, ${Math.round(49 * v + 211 * (1 - v))}, 0.25)`;
        ctx.fillRect(i * cw, height - (j + 1) * ch, cw, ch);
      }
    }
  }

  // pitch outline + halfway line
  ctx.strokeStyle = "#3a7a3a";
  ctx.lineWidth = 1.5;
  ctx.strokeRect(0, 0, width, height);
  ctx.beginPath();
  ctx.moveTo(width / 2, 0);
  ctx.lineTo(width / 2, height);
  ctx.stroke();

  for (const trail of scene.trails) {
    if (trail.points.length < 2) continue;
    ctx.strokeStyle = ROLE_COLORS[trail.role];
    ctx.globalAlpha = trail.observed ? 0.35 : 0.7;
    ctx.lineWidth = trail.role === "ball" ? 1 : 1.5;
    ctx.setLineDash(trail.observed ? [4, 3] : []);
    ctx.beginPath();
    trail.points.forEach((p, i) => {
      const px = p.x * sx;
      const py = height - p.y * sy;
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.setLineDash([]);
  }

  ctx.globalAlpha = 1;
  for (const m of scene.markers) {
    ctx.fillStyle = ROLE_COLORS[m.role];
    ctx.beginPath();
    ctx.arc(m.x * sx, height - m.y * sy, m.role === "ball" ? 3.5 : 5, 0, Math.PI * 2);
    ctx.fill();
    if (m.observed) {
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1;
      ctx.stroke();
    }
  }
}
