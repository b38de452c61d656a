import { describe, expect, it } from "vitest";

import { StudioClient } from "../src/api.js";
import { hashFrames, parseSeed, Studio } from "../src/studio.js";
import type { CanvasInfo, JobStatus, TrajectoryDocument } from "../src/types.js";

const INFO: CanvasInfo = { width: 32, height: 32, frames: 8, image: "" };

function response(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(body),
  } as unknown as Response;
}

function doneJob(strokes: TrajectoryDocument | null): JobStatus {
  return {
    id: "job-000001",
    state: "done",
    progress: { step: 10, total: 10 },
    error: null,
    seed: 7,
    frames: ["/api/jobs/job-000001/frames/0"],
    warnings: [],
    strokes,
  };
}

function studioWith(responses: Response[]): { studio: Studio; sent: string[] } {
  const sent: string[] = [];
  const fetchFn = (url: string, init?: RequestInit) => {
    if (init?.body !== undefined) {
      sent.push(String(init.body));
    }
    const next = responses.shift();
    if (next === undefined) {
      throw new Error(`unexpected fetch ${url}`);
    }
    return Promise.resolve(next);
  };
  const client = new StudioClient("", fetchFn, () => Promise.resolve());
  return { studio: new Studio(client, INFO, 8), sent };
}

function drawOne(studio: Studio): void {
  studio.store.begin({ x: 100, y: 100 });
  studio.store.extend({ x: 180, y: 100 });
  studio.store.finish();
}

describe("parseSeed", () => {
  it("empty input leaves the seed to the service", () => {
    expect(parseSeed("")).toBeUndefined();
    expect(parseSeed("  ")).toBeUndefined();
  });

  it("accepts non-negative integers and rejects the rest", () => {
    expect(parseSeed("11")).toBe(11);
    expect(parseSeed(" 0 ")).toBe(0);
    for (const bad of ["-1", "1.5", "seven"]) {
      expect(() => parseSeed(bad)).toThrow("seed must be a non-negative integer");
    }
  });
});

describe("buildBody", () => {
  it("attaches the stroke document sized to the display canvas", () => {
    const { studio } = studioWith([]);
    drawOne(studio);
    const body = studio.buildBody({ caption: "red square moves right", seed: "7" });
    expect(body.caption).toBe("red square moves right");
    expect(body.seed).toBe(7);
    expect(body.strokes?.canvas).toEqual({ width: 256, height: 256, frames: 8 });
    expect(body.strokes?.strokes[0]).toEqual([
      { x: 100, y: 100 },
      { x: 180, y: 100 },
    ]);
  });

  it("omits strokes and seed when there are none", () => {
    const { studio } = studioWith([]);
    const body = studio.buildBody({ caption: "", seed: "" });
    expect(body.strokes).toBeUndefined();
    expect(body.seed).toBeUndefined();
  });
});

describe("submit", () => {
  it("runs one generation to completion and checks the stroke echo", async () => {
    const probe = studioWith([]);
    drawOne(probe.studio);
    const expected = probe.studio.buildBody({ caption: "x", seed: "7" }).strokes!;
    const echoed = JSON.parse(JSON.stringify(expected)) as TrajectoryDocument;

    const { studio, sent } = studioWith([
      response(200, { job_id: "job-000001", seed: 7, warnings: [] }),
      response(200, doneJob(echoed)),
    ]);
    drawOne(studio);
    const progress: number[] = [];
    const job = await studio.submit(
      { caption: "x", seed: "7" },
      { onProgress: (step) => progress.push(step) },
    );
    expect(job?.state).toBe("done");
    expect(JSON.parse(sent[0]).strokes).toEqual(expected);
    expect(studio.echoOk).toBe(true);
    expect(studio.busy).toBe(false);
    expect(progress).toEqual([10]);
  });

  it("flags a mismatched echo", async () => {
    const tampered: TrajectoryDocument = {
      canvas: { width: 256, height: 256, frames: 8 },
      strokes: [[{ x: 0, y: 0 }, { x: 1, y: 1 }]],
    };
    const { studio } = studioWith([
      response(200, { job_id: "job-000001", seed: 7, warnings: [] }),
      response(200, doneJob(tampered)),
    ]);
    drawOne(studio);
    await studio.submit({ caption: "", seed: "" });
    expect(studio.echoOk).toBe(false);
  });

  it("allows only one generation in flight", async () => {
    let release: (value: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    const fetchFn = (url: string) => {
      if (url === "/api/generate") {
        return gate;
      }
      return Promise.resolve(response(200, doneJob(null)));
    };
    const client = new StudioClient("", fetchFn, () => Promise.resolve());
    const studio = new Studio(client, INFO, 8);
    const first = studio.submit({ caption: "", seed: "" });
    expect(studio.busy).toBe(true);
    const errors: string[] = [];
    const second = await studio.submit({ caption: "", seed: "" }, { onError: (m) => errors.push(m) });
    expect(second).toBeNull();
    expect(errors).toEqual(["a generation is already running"]);
    release(response(200, { job_id: "job-000001", seed: 1, warnings: [] }));
    await first;
    expect(studio.busy).toBe(false);
  });

  it("reports a rejected request inline and frees the slot", async () => {
    const { studio } = studioWith([
      response(400, { error: "canvas.frames is 4, model generates 8" }),
    ]);
    const errors: string[] = [];
    const job = await studio.submit({ caption: "", seed: "" }, { onError: (m) => errors.push(m) });
    expect(job).toBeNull();
    expect(errors).toEqual(["canvas.frames is 4, model generates 8"]);
    expect(studio.busy).toBe(false);
  });

  it("surfaces a failed job's error", async () => {
    const { studio } = studioWith([
      response(200, { job_id: "job-000001", seed: 7, warnings: [] }),
      response(200, { ...doneJob(null), state: "failed", error: "worker exploded" }),
    ]);
    const errors: string[] = [];
    const job = await studio.submit({ caption: "", seed: "" }, { onError: (m) => errors.push(m) });
    expect(job).toBeNull();
    expect(errors).toEqual(["worker exploded"]);
  });
});

describe("overlay toggle", () => {
  it("flips visibility", () => {
    const { studio } = studioWith([]);
    expect(studio.showOverlay).toBe(true);
    expect(studio.toggleOverlay()).toBe(false);
    expect(studio.toggleOverlay()).toBe(true);
  });
});

describe("hashFrames", () => {
  it("identical frame bytes hash identically, different bytes differ", async () => {
    const a = new Uint8Array([1, 2, 3, 4]).buffer;
    const b = new Uint8Array([1, 2, 3, 4]).buffer;
    const c = new Uint8Array([9, 9, 9, 9]).buffer;
    const first = await hashFrames([a, c]);
    const replay = await hashFrames([b, c]);
    const other = await hashFrames([c, a]);
    expect(first).toBe(replay);
    expect(first).not.toBe(other);
    expect(first).toMatch(/^[0-9a-f]{64}$/);
  });
});
