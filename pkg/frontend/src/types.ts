/** Shared wire and editor types for the trajectory studio. */

export interface Point {
  x: number;
  y: number;
}

/** One in-progress or finished stroke in display-canvas coordinates. */
export interface StrokeDraft {
  points: Point[];
  /** display color slot, cycles per stroke */
  color: number;
}

/** Interchange document submitted to the service and echoed back by jobs. */
export interface TrajectoryDocument {
  canvas: { width: number; height: number; frames: number };
  strokes: { x: number; y: number }[][];
}

/** GET /api/canvas */
export interface CanvasInfo {
  width: number;
  height: number;
  frames: number;
  /** base64 PNG of the base frame */
  image: string;
}

/** POST /api/generate request body. */
export interface GenerateBody {
  caption: string;
  seed?: number;
  guidance?: number;
  strokes?: TrajectoryDocument;
}

/** POST /api/generate response. */
export interface GenerateResponse {
  job_id: string;
  seed: number;
  warnings: string[];
}

export type JobState = "queued" | "running" | "done" | "failed";

/** GET /api/jobs/{id} */
export interface JobStatus {
  id: string;
  state: JobState;
  progress: { step: number; total: number };
  error: string | null;
  seed: number;
  frames: string[];
  warnings: string[];
  strokes: TrajectoryDocument | null;
}
