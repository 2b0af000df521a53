/**
 * Typed client over the documented JSON API.  The fetch function is
 * injectable so tests run fully offline against recorded fixtures.
 */

import type {
  DslDiagnostics,
  GenerateRequest,
  GenerateResponse,
  PresetInfo,
  Scenario,
  ScenarioSummary,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public diagnostics: DslDiagnostics | null = null,
    public fieldErrors: { field: string; message: string }[] | null = null
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async handle<T>(resp: Response): Promise<T> {
    if (resp.ok) return (await resp.json()) as T;
    let detail: unknown = null;
    try {
      detail = (await resp.json()) as Record<string, unknown>;
    } catch {
      throw new ApiError(resp.status, `request failed with status ${resp.status}`);
    }
    const body = detail as { detail?: unknown; errors?: { field: string; message: string }[] };
    if (resp.status === 422 && body.detail && typeof body.detail === "object") {
      const d = body.detail as DslDiagnostics;
      throw new ApiError(resp.status, d.message, d);
    }
    if (resp.status === 400 && Array.isArray(body.errors)) {
      const first = body.errors[0];
      throw new ApiError(resp.status, `${first.field}: ${first.message}`, null, body.errors);
    }
    throw new ApiError(resp.status, typeof body.detail === "string" ? body.detail : `status ${resp.status}`);
  }

  async health(): Promise<{ status: string; ball_mode: string }> {
    return this.handle(await this.fetchFn(`${this.baseUrl}/health`));
  }

  async scenarios(split: string = "test"): Promise<ScenarioSummary[]> {
    return this.handle(await this.fetchFn(`${this.baseUrl}/scenarios?split=${encodeURIComponent(split)}`));
  }

  async scenario(id: string): Promise<Scenario> {
    return this.handle(await this.fetchFn(`${this.baseUrl}/scenarios/${encodeURIComponent(id)}`));
  }

  async generate(request: GenerateRequest): Promise<GenerateResponse> {
    return this.handle(
      await this.fetchFn(`${this.baseUrl}/generate`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      })
    );
  }

  async dslCheck(program: string): Promise<{ ok: boolean; normalized: string | null; fixture_score: number | null }> {
    return this.handle(
      await this.fetchFn(`${this.baseUrl}/dsl/check`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ program }),
      })
    );
  }

  async presets(): Promise<PresetInfo[]> {
    return this.handle(await this.fetchFn(`${this.baseUrl}/objectives/presets`));
  }
}
