import { describe, expect, it } from "vitest";

import { POLL_INTERVAL_MS, RequestRejected, StudioClient } from "../src/api.js";
import type { JobStatus } from "../src/types.js";

function response(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(body),
  } as unknown as Response;
}

function jobBody(state: JobStatus["state"], step: number, extra: Partial<JobStatus> = {}): JobStatus {
  return {
    id: "job-000001",
    state,
    progress: { step, total: 10 },
    error: null,
    seed: 7,
    frames: [],
    warnings: [],
    strokes: null,
    ...extra,
  };
}

interface Call {
  url: string;
  init?: RequestInit;
}

function scriptedClient(responses: Response[], sleeps: number[] = []) {
  const calls: Call[] = [];
  const fetchFn = (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    const next = responses.shift();
    if (next === undefined) {
      throw new Error("fake fetch exhausted");
    }
    return Promise.resolve(next);
  };
  const sleep = (ms: number) => {
    sleeps.push(ms);
    return Promise.resolve();
  };
  return { client: new StudioClient("", fetchFn, sleep), calls };
}

describe("generate", () => {
  it("POSTs caption, seed and strokes as JSON", async () => {
    const { client, calls } = scriptedClient([
      response(200, { job_id: "job-000001", seed: 7, warnings: [] }),
    ]);
    const doc = {
      canvas: { width: 256, height: 256, frames: 8 },
      strokes: [[{ x: 1, y: 2 }, { x: 9, y: 2 }]],
    };
    const accepted = await client.generate({ caption: "red square moves right", seed: 7, strokes: doc });
    expect(accepted.job_id).toBe("job-000001");
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("/api/generate");
    expect(calls[0].init?.method).toBe("POST");
    const sent = JSON.parse(String(calls[0].init?.body));
    expect(sent).toEqual({ caption: "red square moves right", seed: 7, strokes: doc });
  });

  it("surfaces a 400 as a rejection carrying the server's field message", async () => {
    const { client } = scriptedClient([
      response(400, { error: "strokes[0][1].x: expected a number, got 'NaN'" }),
    ]);
    await expect(client.generate({ caption: "" })).rejects.toThrow(RequestRejected);
    await expect(
      scriptedClient([response(400, { error: "seed must be a non-negative integer" })])
        .client.generate({ caption: "" }),
    ).rejects.toThrow("seed must be a non-negative integer");
  });

  it("treats other failures as plain errors", async () => {
    const { client } = scriptedClient([response(500, {})]);
    await expect(client.generate({ caption: "" })).rejects.toThrow("generate failed: 500");
  });
});

describe("pollUntilDone", () => {
  it("polls at 500 ms until done and reports progress", async () => {
    const sleeps: number[] = [];
    const { client, calls } = scriptedClient(
      [
        response(200, jobBody("queued", 0)),
        response(200, jobBody("running", 4)),
        response(200, jobBody("running", 9)),
        response(200, jobBody("done", 10, { frames: ["/api/jobs/job-000001/frames/0"] })),
      ],
      sleeps,
    );
    const seen: Array<[number, string]> = [];
    const job = await client.pollUntilDone("job-000001", {
      onProgress: (step, _total, state) => seen.push([step, state]),
    });
    expect(job.state).toBe("done");
    expect(job.frames).toHaveLength(1);
    expect(calls.every((c) => c.url === "/api/jobs/job-000001")).toBe(true);
    expect(calls).toHaveLength(4);
    expect(sleeps).toEqual([POLL_INTERVAL_MS, POLL_INTERVAL_MS, POLL_INTERVAL_MS]);
    expect(seen).toEqual([[0, "queued"], [4, "running"], [9, "running"], [10, "done"]]);
  });

  it("returns a failed job so the caller can surface its error", async () => {
    const { client } = scriptedClient([
      response(200, jobBody("failed", 3, { error: "worker exploded" })),
    ]);
    const job = await client.pollUntilDone("job-000001");
    expect(job.state).toBe("failed");
    expect(job.error).toBe("worker exploded");
  });

  it("honors an abort signal between polls", async () => {
    const controller = new AbortController();
    controller.abort();
    const { client, calls } = scriptedClient([]);
    await expect(
      client.pollUntilDone("job-000001", { signal: controller.signal }),
    ).rejects.toThrow("Aborted");
    expect(calls).toHaveLength(0);
  });
});

describe("frameUrl", () => {
  it("prefixes the service base URL", () => {
    const client = new StudioClient("http://127.0.0.1:8000");
    expect(client.frameUrl("/api/jobs/job-1/frames/0")).toBe(
      "http://127.0.0.1:8000/api/jobs/job-1/frames/0",
    );
  });
});
