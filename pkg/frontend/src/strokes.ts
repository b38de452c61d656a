/** Stroke collection: capture lifecycle, the 8-stroke cap, and interchange
 * document serialization. Captured geometry is never mutated after the
 * pointer is released; the document carries display-canvas coordinates and
 * the service maps them onto the model canvas. */

import { appendThinned, strokeIsValid } from "./geometry.js";
import type { Point, StrokeDraft, TrajectoryDocument } from "./types.js";

export const MAX_STROKES = 8;

export type DiscardReason = "single-point" | null;

export class StrokeStore {
  strokes: StrokeDraft[] = [];
  active: StrokeDraft | null = null;

  get full(): boolean {
    return this.strokes.length >= MAX_STROKES;
  }

  /** Start a stroke; returns false when the cap is reached. */
  begin(p: Point): boolean {
    if (this.full || this.active !== null) {
      return false;
    }
    this.active = { points: [p], color: this.strokes.length };
    return true;
  }

  /** Extend the active stroke; thinning drops samples closer than 2 px. */
  extend(p: Point): void {
    if (this.active !== null) {
      appendThinned(this.active.points, p);
    }
  }

  /**
   * Finish the active stroke. A click without motion leaves a single point,
   * which is discarded; the reason is returned so the UI can show a hint.
   */
  finish(): DiscardReason {
    const stroke = this.active;
    this.active = null;
    if (stroke === null) {
      return null;
    }
    if (!strokeIsValid(stroke.points)) {
      return "single-point";
    }
    this.strokes.push(stroke);
    return null;
  }

  undo(): void {
    this.strokes.pop();
  }

  clear(): void {
    this.strokes = [];
    this.active = null;
  }
}

/** Serialize finished strokes into the interchange document. */
export function buildDocument(
  strokes: StrokeDraft[],
  canvas: { width: number; height: number; frames: number },
): TrajectoryDocument {
  return {
    canvas: { width: canvas.width, height: canvas.height, frames: canvas.frames },
    strokes: strokes.map((s) => s.points.map((p) => ({ x: p.x, y: p.y }))),
  };
}

/** Deep equality between a submitted document and a service echo. */
export function documentsEqual(a: TrajectoryDocument | null, b: TrajectoryDocument | null): boolean {
  if (a === null || b === null) {
    return a === b;
  }
  if (
    a.canvas.width !== b.canvas.width ||
    a.canvas.height !== b.canvas.height ||
    a.canvas.frames !== b.canvas.frames ||
    a.strokes.length !== b.strokes.length
  ) {
    return false;
  }
  for (let i = 0; i < a.strokes.length; i++) {
    if (a.strokes[i].length !== b.strokes[i].length) {
      return false;
    }
    for (let j = 0; j < a.strokes[i].length; j++) {
      const p = a.strokes[i][j];
      const q = b.strokes[i][j];
      if (p.x !== q.x || p.y !== q.y) {
        return false;
      }
    }
  }
  return true;
}
