import { describe, expect, it } from "vitest";

import { drawStroke, drawStrokes, strokeColor, STROKE_COLORS } from "../src/draw.js";
import type { StrokeContext } from "../src/draw.js";
import type { StrokeDraft } from "../src/types.js";

type Op = [string, ...number[]];

function recordingContext(): { ctx: StrokeContext; ops: Op[]; styles: string[] } {
  const ops: Op[] = [];
  const styles: string[] = [];
  const ctx: StrokeContext = {
    set strokeStyle(v: string | CanvasGradient | CanvasPattern) {
      styles.push(String(v));
    },
    get strokeStyle() {
      return styles[styles.length - 1] ?? "";
    },
    fillStyle: "",
    lineWidth: 0,
    lineCap: "butt",
    lineJoin: "miter",
    beginPath: () => void ops.push(["beginPath"]),
    moveTo: (x, y) => void ops.push(["moveTo", x, y]),
    lineTo: (x, y) => void ops.push(["lineTo", x, y]),
    closePath: () => void ops.push(["closePath"]),
    stroke: () => void ops.push(["stroke"]),
    fill: () => void ops.push(["fill"]),
  };
  return { ctx, ops, styles };
}

const STROKE: StrokeDraft = {
  color: 0,
  points: [
    { x: 0, y: 0 },
    { x: 10, y: 0 },
    { x: 20, y: 0 },
  ],
};

describe("drawStroke", () => {
  it("renders the polyline then a filled arrowhead at the end", () => {
    const { ctx, ops } = recordingContext();
    drawStroke(ctx, STROKE);
    const names = ops.map((op) => op[0]);
    // polyline: beginPath moveTo lineTo lineTo stroke
    expect(names.slice(0, 5)).toEqual(["beginPath", "moveTo", "lineTo", "lineTo", "stroke"]);
    // arrow: beginPath moveTo lineTo lineTo closePath fill
    expect(names.slice(5)).toEqual(["beginPath", "moveTo", "lineTo", "lineTo", "closePath", "fill"]);
    const tip = ops.filter((op) => op[0] === "lineTo")[2];
    expect(tip.slice(1)).toEqual([20, 0]);
  });

  it("draws a single-point active stroke as a bare path without an arrow", () => {
    const { ctx, ops } = recordingContext();
    drawStroke(ctx, { color: 0, points: [{ x: 4, y: 4 }] });
    expect(ops.map((op) => op[0])).toEqual(["beginPath", "moveTo", "stroke"]);
  });

  it("skips empty strokes", () => {
    const { ctx, ops } = recordingContext();
    drawStroke(ctx, { color: 0, points: [] });
    expect(ops).toHaveLength(0);
  });
});

describe("stroke colors", () => {
  it("cycles slots through the palette", () => {
    expect(strokeColor(0)).toBe(STROKE_COLORS[0]);
    expect(strokeColor(7)).toBe(STROKE_COLORS[7]);
    expect(strokeColor(8)).toBe(STROKE_COLORS[0]);
  });

  it("drawStrokes styles each stroke by its slot", () => {
    const { ctx, styles } = recordingContext();
    drawStrokes(ctx, [
      { ...STROKE, color: 0 },
      { ...STROKE, color: 1 },
    ]);
    expect(styles).toEqual([STROKE_COLORS[0], STROKE_COLORS[1]]);
  });
});
