import { describe, expect, it } from "vitest";

import { buildDocument, documentsEqual, MAX_STROKES, StrokeStore } from "../src/strokes.js";
import type { TrajectoryDocument } from "../src/types.js";

function dragStroke(store: StrokeStore, x0: number, x1: number, y = 10): void {
  store.begin({ x: x0, y });
  for (let x = x0; x <= x1; x += 3) {
    store.extend({ x, y });
  }
  store.extend({ x: x1, y });
  store.finish();
}

describe("StrokeStore", () => {
  it("captures a drag as one stroke", () => {
    const store = new StrokeStore();
    dragStroke(store, 0, 30);
    expect(store.strokes).toHaveLength(1);
    expect(store.strokes[0].points.length).toBeGreaterThanOrEqual(2);
    expect(store.active).toBeNull();
  });

  it("discards a click without motion and reports the reason", () => {
    const store = new StrokeStore();
    store.begin({ x: 5, y: 5 });
    expect(store.finish()).toBe("single-point");
    expect(store.strokes).toHaveLength(0);
  });

  it("a click with sub-spacing jitter is still discarded", () => {
    const store = new StrokeStore();
    store.begin({ x: 5, y: 5 });
    store.extend({ x: 5.5, y: 5.2 }); // under the 2 px thinning floor
    expect(store.finish()).toBe("single-point");
    expect(store.strokes).toHaveLength(0);
  });

  it("caps the collection at 8 strokes", () => {
    const store = new StrokeStore();
    for (let i = 0; i < MAX_STROKES; i++) {
      dragStroke(store, 0, 20, i * 4);
    }
    expect(store.full).toBe(true);
    expect(store.begin({ x: 0, y: 0 })).toBe(false);
    expect(store.strokes).toHaveLength(8);
  });

  it("undo removes the latest stroke, clear removes all", () => {
    const store = new StrokeStore();
    dragStroke(store, 0, 20, 4);
    dragStroke(store, 0, 20, 8);
    store.undo();
    expect(store.strokes).toHaveLength(1);
    store.clear();
    expect(store.strokes).toHaveLength(0);
  });

  it("assigns color slots in drawing order", () => {
    const store = new StrokeStore();
    dragStroke(store, 0, 20, 4);
    dragStroke(store, 0, 20, 8);
    expect(store.strokes.map((s) => s.color)).toEqual([0, 1]);
  });
});

describe("interchange document", () => {
  it("serializes captured geometry without mutating it", () => {
    const store = new StrokeStore();
    store.begin({ x: 1.25, y: 2.5 });
    store.extend({ x: 20.75, y: 2.5 });
    store.finish();
    const before = JSON.stringify(store.strokes);
    const doc = buildDocument(store.strokes, { width: 256, height: 256, frames: 8 });
    expect(JSON.stringify(store.strokes)).toBe(before);
    expect(doc.strokes[0]).toEqual([
      { x: 1.25, y: 2.5 },
      { x: 20.75, y: 2.5 },
    ]);
    expect(doc.canvas).toEqual({ width: 256, height: 256, frames: 8 });
  });

  it("round-trips through JSON unchanged", () => {
    const store = new StrokeStore();
    dragStroke(store, 3, 60, 17.5);
    dragStroke(store, 40, 9, 31);
    const doc = buildDocument(store.strokes, { width: 256, height: 256, frames: 8 });
    const back = JSON.parse(JSON.stringify(doc)) as TrajectoryDocument;
    expect(back).toEqual(doc);
    expect(documentsEqual(doc, back)).toBe(true);
  });

  it("documentsEqual distinguishes geometry and canvas changes", () => {
    const doc = (): TrajectoryDocument => ({
      canvas: { width: 256, height: 256, frames: 8 },
      strokes: [[{ x: 1, y: 2 }, { x: 3, y: 4 }]],
    });
    expect(documentsEqual(doc(), doc())).toBe(true);
    const moved = doc();
    moved.strokes[0][1].x = 5;
    expect(documentsEqual(doc(), moved)).toBe(false);
    const resized = doc();
    resized.canvas.frames = 4;
    expect(documentsEqual(doc(), resized)).toBe(false);
    expect(documentsEqual(doc(), null)).toBe(false);
    expect(documentsEqual(null, null)).toBe(true);
  });
});
