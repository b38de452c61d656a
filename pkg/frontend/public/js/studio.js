/** DOM-free application state: one in-flight generation, overlay toggle,
 * submission payload assembly, and the dev-mode determinism check. */
import { RequestRejected } from "./api.js";
import { buildDocument, documentsEqual, StrokeStore } from "./strokes.js";
export function parseSeed(raw) {
    const text = raw.trim();
    if (text === "") {
        return undefined;
    }
    const value = Number(text);
    if (!Number.isInteger(value) || value < 0) {
        throw new RequestRejected("seed must be a non-negative integer");
    }
    return value;
}
export class Studio {
    constructor(client, canvasInfo, scale) {
        this.client = client;
        this.canvasInfo = canvasInfo;
        this.scale = scale;
        this.store = new StrokeStore();
        this.showOverlay = true;
        this.busy = false;
        this.lastJob = null;
        /** set after every completed job: did the echo match the submission */
        this.echoOk = null;
    }
    /** Display-canvas pixel size (model canvas times integer scale). */
    get displayWidth() {
        return this.canvasInfo.width * this.scale;
    }
    get displayHeight() {
        return this.canvasInfo.height * this.scale;
    }
    toggleOverlay() {
        this.showOverlay = !this.showOverlay;
        return this.showOverlay;
    }
    buildBody(fields) {
        const body = { caption: fields.caption };
        const seed = parseSeed(fields.seed);
        if (seed !== undefined) {
            body.seed = seed;
        }
        if (fields.guidance !== undefined) {
            body.guidance = fields.guidance;
        }
        if (this.store.strokes.length > 0) {
            body.strokes = buildDocument(this.store.strokes, {
                width: this.displayWidth,
                height: this.displayHeight,
                frames: this.canvasInfo.frames,
            });
        }
        return body;
    }
    /**
     * Submit and poll to completion. Returns the finished job, or null when a
     * generation is already in flight or the request was rejected (the error
     * callback receives the message either way).
     */
    async submit(fields, events = {}) {
        if (this.busy) {
            events.onError?.("a generation is already running");
            return null;
        }
        this.busy = true;
        try {
            const body = this.buildBody(fields);
            const accepted = await this.client.generate(body);
            const job = await this.client.pollUntilDone(accepted.job_id, {
                onProgress: events.onProgress,
            });
            if (job.state === "failed") {
                events.onError?.(job.error ?? "generation failed");
                return null;
            }
            this.lastJob = job;
            this.echoOk = documentsEqual(body.strokes ?? null, job.strokes);
            events.onDone?.(job);
            return job;
        }
        catch (err) {
            if (err instanceof RequestRejected) {
                events.onError?.(err.message);
                return null;
            }
            throw err;
        }
        finally {
            this.busy = false;
        }
    }
}
/** Hex digest of concatenated frame bytes; replaying a seed must match. */
export async function hashFrames(frames, digest = (data) => crypto.subtle.digest("SHA-256", data)) {
    let total = 0;
    for (const f of frames) {
        total += f.byteLength;
    }
    const joined = new Uint8Array(total);
    let offset = 0;
    for (const f of frames) {
        joined.set(new Uint8Array(f), offset);
        offset += f.byteLength;
    }
    const raw = new Uint8Array(await digest(joined.buffer));
    return Array.from(raw, (b) => b.toString(16).padStart(2, "0")).join("");
}
