import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import type { GenerateRequest } from "../src/types.js";

const responseFixture = readFileSync(new URL("../fixtures/generate_response.json", import.meta.url), "utf-8");
const requestFixture = readFileSync(new URL("../fixtures/generate_request.json", import.meta.url), "utf-8");
const scenarioFixture = readFileSync(new URL("../fixtures/scenario.json", import.meta.url), "utf-8");

function fakeFetch(routes: Record<string, { status: number; body: string }>): FetchLike & { calls: string[] } {
  const calls: string[] = [];
  const fn = (async (input: string, init?: RequestInit) => {
    calls.push(`${init?.method ?? "GET"} ${input}`);
    const hit = routes[input];
    if (!hit) return new Response("{}", { status: 404 });
    return new Response(hit.body, { status: hit.status, headers: { "content-type": "application/json" } });
  }) as FetchLike & { calls: string[] };
  fn.calls = calls;
  return fn;
}

describe("ApiClient (offline, fixture-intercepted)", () => {
  it("fetches scenarios and generates against recorded fixtures", async () => {
    const fetchFn = fakeFetch({
      "/scenarios/g0-e5": { status: 200, body: scenarioFixture },
      "/generate": { status: 200, body: responseFixture },
    });
    const api = new ApiClient("", fetchFn);
    const scenario = await api.scenario("g0-e5");
    expect(scenario.truth_trajectories).toHaveLength(23);
    const resp = await api.generate(JSON.parse(requestFixture) as GenerateRequest);
    expect(resp.trajectories).toHaveLength(20);
    expect(fetchFn.calls).toEqual(["GET /scenarios/g0-e5", "POST /generate"]);
  });

  it("sends the request body byte-for-byte", async () => {
    let sent = "";
    const fetchFn: FetchLike = async (_input, init) => {
      sent = String(init?.body ?? "");
      return new Response(responseFixture, { status: 200 });
    };
    const api = new ApiClient("", fetchFn);
    await api.generate(JSON.parse(requestFixture) as GenerateRequest);
    expect(sent).toBe(JSON.stringify(JSON.parse(requestFixture)));
  });

  it("maps 422 bodies to diagnostics", async () => {
    const fetchFn = fakeFetch({
      "/dsl/check": {
        status: 422,
        body: JSON.stringify({ detail: { message: "1:6: expected expression", line: 1, col: 6 } }),
      },
    });
    const api = new ApiClient("", fetchFn);
    await expect(api.dslCheck("relu(")).rejects.toMatchObject({
      status: 422,
      diagnostics: { line: 1, col: 6 },
    });
  });

  it("maps 400 bodies to field errors", async () => {
    const fetchFn = fakeFetch({
      "/generate": {
        status: 400,
        body: JSON.stringify({ detail: "schema violation", errors: [{ field: "n_samples", message: "too big" }] }),
      },
    });
    const api = new ApiClient("", fetchFn);
    try {
      await api.generate(JSON.parse(requestFixture) as GenerateRequest);
      throw new Error("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).fieldErrors?.[0].field).toBe("n_samples");
    }
  });
});
