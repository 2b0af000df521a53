/**
 * Compare view state: browse the N returned samples next to the ground
 * truth, show score fields verbatim, and pre-fill a new draft from the
 * viewed request (the "iterate" action).
 */

import { draftFromRequest, type ObjectiveDraft } from "./draft.js";
import type { GenerateRequest, GenerateResponse } from "./types.js";

export interface ScorePanel {
  sampleScores: number[] | null;
  referenceScore: number | null;
  metrics: { label: string; value: number }[] | null;
}

export class CompareView {
  selected = 0;

  constructor(
    public readonly request: GenerateRequest,
    public readonly response: GenerateResponse
  ) {}

  get sampleCount(): number {
    return this.response.trajectories.length;
  }

  select(index: number): number {
    if (index < 0 || index >= this.sampleCount) {
      throw new Error(`sample ${index} out of range 0..${this.sampleCount - 1}`);
    }
    this.selected = index;
    return this.selected;
  }

  /** Scores come verbatim from the response; the board computes nothing. */
  scorePanel(): ScorePanel {
    const m = this.response.metrics;
    return {
      sampleScores: this.response.guidance_scores,
      referenceScore: this.response.reference_score,
      metrics: m
        ? [
            { label: "ADE", value: m.ade },
            { label: "FDE", value: m.fde },
            { label: "MR%", value: m.mr },
            { label: "JADE", value: m.jade },
            { label: "JFDE", value: m.jfde },
            { label: "JMR%", value: m.jmr },
          ]
        : null,
    };
  }

  selectedScore(): number | null {
    const scores = this.response.guidance_scores;
    return scores ? scores[this.selected] : null;
  }

  /** Pre-fill a draft with the request that produced this view. */
  iterate(): ObjectiveDraft {
    return draftFromRequest(this.request);
  }
}

/** Discard stale responses: only the newest in-flight request may land. */
export class RequestGate {
  private counter = 0;

  next(): number {
    return ++this.counter;
  }

  isCurrent(id: number): boolean {
    return id === this.counter;
  }
}
