/**
 * Board wiring: scenario picker, objective composer, playback and the
 * sample-vs-truth compare view.  All numbers shown come from service
 * responses; this file only moves them onto the screen.
 */

import { ApiClient, ApiError } from "./api.js";
import { CompareView, RequestGate } from "./compare.js";
import { composeRequest, emptyDraft, validateDraft, type ObjectiveDraft } from "./draft.js";
import { DATA_FPS, PlaybackClock } from "./playback.js";
import { drawScene, sceneFromSample, sceneFromScenario } from "./scene.js";
import type { GenerateResponse, Scenario, ScenarioSummary } from "./types.js";

const api = new ApiClient("");
const gate = new RequestGate();

interface BoardState {
  scenarios: ScenarioSummary[];
  scenario: Scenario | null;
  draft: ObjectiveDraft;
  compare: CompareView | null;
  clock: PlaybackClock;
  showTruth: boolean;
}

const state: BoardState = {
  scenarios: [],
  scenario: null,
  draft: emptyDraft(""),
  compare: null,
  clock: new PlaybackClock(64, DATA_FPS),
  showTruth: true,
};

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setStatus(text: string, isError = false): void {
  const status = el<HTMLDivElement>("status");
  status.textContent = text;
  status.className = isError ? "status error" : "status";
}

async function loadScenarios(): Promise<void> {
  state.scenarios = await api.scenarios("test");
  const select = el<HTMLSelectElement>("scenario-select");
  select.innerHTML = "";
  for (const s of state.scenarios) {
    const opt = document.createElement("option");
    opt.value = s.id;
    opt.textContent = `${s.id} · ${s.action} (${s.valid_frames} frames)`;
    select.appendChild(opt);
  }
  if (state.scenarios.length) {
    await selectScenario(state.scenarios[0].id);
  }
}

async function selectScenario(id: string): Promise<void> {
  state.scenario = await api.scenario(id);
  state.draft.scenarioId = id;
  state.compare = null;
  state.clock = new PlaybackClock(64, state.clock.displayFps);
  state.clock.play();
  setStatus(`scenario ${id}: ${state.scenario.action}, split ${state.scenario.split}`);
  renderScorePanel();
}

function draftFromControls(): ObjectiveDraft {
  const d = state.draft;
  d.kind = (el<HTMLSelectElement>("objective-kind").value as ObjectiveDraft["kind"]) ?? "none";
  d.guidedTeam = el<HTMLSelectElement>("guided-team").value as ObjectiveDraft["guidedTeam"];
  d.opponentMode = el<HTMLSelectElement>("opponent-mode").value as ObjectiveDraft["opponentMode"];
  d.nSamples = Number(el<HTMLInputElement>("n-samples").value);
  d.seed = Number(el<HTMLInputElement>("seed").value);
  const scale = el<HTMLInputElement>("guidance-scale").value;
  d.guidanceScale = scale === "" ? null : Number(scale);
  d.dslProgram = el<HTMLTextAreaElement>("dsl-program").value;
  d.includePitchControl = el<HTMLInputElement>("pitch-control").checked;
  d.rules = d.rules.map((rule) => ({
    ...rule,
    enabled: el<HTMLInputElement>(`rule-${rule.id}`).checked,
    weight: Number(el<HTMLInputElement>(`weight-${rule.id}`).value),
  }));
  return d;
}

function syncControls(d: ObjectiveDraft): void {
  el<HTMLSelectElement>("objective-kind").value = d.kind;
  el<HTMLSelectElement>("guided-team").value = d.guidedTeam;
  el<HTMLSelectElement>("opponent-mode").value = d.opponentMode;
  el<HTMLInputElement>("n-samples").value = String(d.nSamples);
  el<HTMLInputElement>("seed").value = String(d.seed);
  el<HTMLInputElement>("guidance-scale").value = d.guidanceScale === null ? "" : String(d.guidanceScale);
  el<HTMLTextAreaElement>("dsl-program").value = d.dslProgram;
  el<HTMLInputElement>("pitch-control").checked = d.includePitchControl;
  for (const rule of d.rules) {
    el<HTMLInputElement>(`rule-${rule.id}`).checked = rule.enabled;
    el<HTMLInputElement>(`weight-${rule.id}`).value = String(rule.weight);
  }
}

async function onGenerate(): Promise<void> {
  const draft = draftFromControls();
  const issues = validateDraft(draft);
  if (issues.length) {
    setStatus(issues.map((i) => `${i.field}: ${i.message}`).join("; "), true);
    return;
  }
  const request = composeRequest(draft);
  const ticket = gate.next();
  setStatus("generating…");
  try {
    const response: GenerateResponse = await api.generate(request);
    if (!gate.isCurrent(ticket)) return; // a newer request superseded this one
    state.compare = new CompareView(request, response);
    state.clock = new PlaybackClock(64, state.clock.displayFps);
    state.clock.play();
    renderSampleBrowser();
    renderScorePanel();
    setStatus(`received ${response.trajectories.length} samples`);
  } catch (err) {
    if (!gate.isCurrent(ticket)) return;
    if (err instanceof ApiError && err.diagnostics) {
      setStatus(`objective rejected at ${err.diagnostics.line}:${err.diagnostics.col}: ${err.diagnostics.message}`, true);
    } else {
      setStatus(String(err instanceof Error ? err.message : err), true);
    }
  }
}

function renderSampleBrowser(): void {
  const bar = el<HTMLDivElement>("sample-browser");
  bar.innerHTML = "";
  if (!state.compare) return;
  for (let i = 0; i < state.compare.sampleCount; i++) {
    const btn = document.createElement("button");
    const score = state.compare.response.guidance_scores?.[i];
    btn.textContent = score === undefined || score === null ? `#${i + 1}` : `#${i + 1} · ${score.toFixed(2)}`;
    btn.className = i === state.compare.selected ? "sample selected" : "sample";
    btn.addEventListener("click", () => {
      state.compare?.select(i);
      renderSampleBrowser();
      renderScorePanel();
    });
    bar.appendChild(btn);
  }
}

function renderScorePanel(): void {
  const panel = el<HTMLDivElement>("score-panel");
  if (!state.compare) {
    panel.textContent = state.scenario ? "no generation yet — ground truth playing" : "";
    return;
  }
  const scores = state.compare.scorePanel();
  const rows: string[] = [];
  if (scores.sampleScores) {
    rows.push(`sample score: ${state.compare.selectedScore()?.toFixed(4)}`);
    rows.push(`ground-truth score: ${scores.referenceScore?.toFixed(4)}`);
  }
  if (scores.metrics) {
    rows.push(scores.metrics.map((m) => `${m.label} ${m.value.toFixed(2)}`).join("  "));
  }
  panel.innerHTML = rows.map((r) => `<div>${r}</div>`).join("");
}

function onIterate(): void {
  if (!state.compare) return;
  state.draft = state.compare.iterate();
  syncControls(state.draft);
  setStatus("draft restored from the viewed request — adjust and generate again");
}

let lastTime = performance.now();

function animate(now: number): void {
  const dt = (now - lastTime) / 1000;
  lastTime = now;
  const frame = state.clock.tick(dt);
  const truthCanvas = el<HTMLCanvasElement>("truth-canvas");
  const genCanvas = el<HTMLCanvasElement>("generated-canvas");
  if (state.scenario) {
    const ctx = truthCanvas.getContext("2d");
    if (ctx) drawScene(ctx, sceneFromScenario(state.scenario, frame), truthCanvas.width, truthCanvas.height);
  }
  if (state.compare) {
    const ctx = genCanvas.getContext("2d");
    if (ctx) {
      drawScene(
        ctx,
        sceneFromSample(state.compare.response, state.compare.selected, frame),
        genCanvas.width,
        genCanvas.height
      );
    }
  }
  el<HTMLSpanElement>("frame-label").textContent = `frame ${frame}`;
  requestAnimationFrame(animate);
}

export function boot(): void {
  el<HTMLButtonElement>("generate").addEventListener("click", () => void onGenerate());
  el<HTMLButtonElement>("iterate").addEventListener("click", onIterate);
  el<HTMLSelectElement>("scenario-select").addEventListener("change", (ev) => {
    void selectScenario((ev.target as HTMLSelectElement).value);
  });
  el<HTMLInputElement>("display-fps").addEventListener("change", (ev) => {
    state.clock.displayFps = Number((ev.target as HTMLInputElement).value) || DATA_FPS;
  });
  el<HTMLButtonElement>("play-pause").addEventListener("click", () => {
    if (state.clock.isPlaying) state.clock.pause();
    else state.clock.play();
  });
  void loadScenarios().catch((err) => setStatus(String(err), true));
  requestAnimationFrame(animate);
}

if (typeof document !== "undefined" && document.getElementById("board")) {
  boot();
}
