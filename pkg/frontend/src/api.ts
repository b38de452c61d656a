/** Typed client for the generation service; fetch is injectable for tests. */

import type {
  CanvasInfo,
  GenerateBody,
  GenerateResponse,
  JobState,
  JobStatus,
} from "./types.js";

export const POLL_INTERVAL_MS = 500;

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;
type SleepLike = (ms: number) => Promise<void>;

/** A 400 from the service names the offending field; shown inline. */
export class RequestRejected extends Error {}

const defaultSleep: SleepLike = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export interface PollOptions {
  intervalMs?: number;
  onProgress?: (step: number, total: number, state: JobState) => void;
  signal?: AbortSignal;
}

export class StudioClient {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
    private sleep: SleepLike = defaultSleep,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!res.ok) {
      throw new Error(`GET ${path} failed: ${res.status}`);
    }
    return (await res.json()) as T;
  }

  canvas(): Promise<CanvasInfo> {
    return this.getJson<CanvasInfo>("/api/canvas");
  }

  job(jobId: string): Promise<JobStatus> {
    return this.getJson<JobStatus>(`/api/jobs/${jobId}`);
  }

  frameUrl(relative: string): string {
    return `${this.baseUrl}${relative}`;
  }

  async generate(body: GenerateBody): Promise<GenerateResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/api/generate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await res.json().catch(() => ({}));
    if (res.status === 400) {
      throw new RequestRejected((payload as { error?: string }).error ?? "request rejected");
    }
    if (!res.ok) {
      throw new Error(`generate failed: ${res.status}`);
    }
    return payload as GenerateResponse;
  }

  /** Poll every 500 ms until the job is done or failed; returns the record. */
  async pollUntilDone(jobId: string, options: PollOptions = {}): Promise<JobStatus> {
    const interval = options.intervalMs ?? POLL_INTERVAL_MS;
    for (;;) {
      if (options.signal?.aborted) {
        throw new DOMException("Aborted", "AbortError");
      }
      const job = await this.job(jobId);
      options.onProgress?.(job.progress.step, job.progress.total, job.state);
      if (job.state === "done" || job.state === "failed") {
        return job;
      }
      await this.sleep(interval);
    }
  }
}
