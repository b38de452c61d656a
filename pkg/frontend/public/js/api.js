/** Typed client for the generation service; fetch is injectable for tests. */
export const POLL_INTERVAL_MS = 500;
/** A 400 from the service names the offending field; shown inline. */
export class RequestRejected extends Error {
}
const defaultSleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));
export class StudioClient {
    constructor(baseUrl = "", fetchFn = (input, init) => fetch(input, init), sleep = defaultSleep) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
        this.sleep = sleep;
    }
    async getJson(path) {
        const res = await this.fetchFn(`${this.baseUrl}${path}`);
        if (!res.ok) {
            throw new Error(`GET ${path} failed: ${res.status}`);
        }
        return (await res.json());
    }
    canvas() {
        return this.getJson("/api/canvas");
    }
    job(jobId) {
        return this.getJson(`/api/jobs/${jobId}`);
    }
    frameUrl(relative) {
        return `${this.baseUrl}${relative}`;
    }
    async generate(body) {
        const res = await this.fetchFn(`${this.baseUrl}/api/generate`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        const payload = await res.json().catch(() => ({}));
        if (res.status === 400) {
            throw new RequestRejected(payload.error ?? "request rejected");
        }
        if (!res.ok) {
            throw new Error(`generate failed: ${res.status}`);
        }
        return payload;
    }
    /** Poll every 500 ms until the job is done or failed; returns the record. */
    async pollUntilDone(jobId, options = {}) {
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
