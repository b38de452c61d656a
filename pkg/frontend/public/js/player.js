/** Frame playback timing at a fixed rate (4 fps to match the training data). */
export const PLAYBACK_FPS = 4;
/** Frame shown at a time offset, looping over the clip. */
export function frameIndexAt(elapsedMs, frameCount, fps = PLAYBACK_FPS) {
    if (frameCount <= 0) {
        return 0;
    }
    return Math.floor((Math.max(elapsedMs, 0) * fps) / 1000) % frameCount;
}
/**
 * Drives a looping playback; the timer and clock are injectable so tests can
 * step time manually.
 */
export class FramePlayer {
    constructor(frameCount, onFrame, fps = PLAYBACK_FPS, now = () => performance.now()) {
        this.frameCount = frameCount;
        this.onFrame = onFrame;
        this.fps = fps;
        this.now = now;
        this.startedAt = null;
        this.timer = null;
    }
    get playing() {
        return this.timer !== null;
    }
    start() {
        if (this.timer !== null || this.frameCount === 0) {
            return;
        }
        this.startedAt = this.now();
        this.onFrame(0);
        // tick faster than the frame rate so index changes land on time
        this.timer = setInterval(() => this.tick(), 1000 / this.fps / 4);
    }
    tick() {
        if (this.startedAt === null) {
            return;
        }
        this.onFrame(frameIndexAt(this.now() - this.startedAt, this.frameCount, this.fps));
    }
    stop() {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
        this.startedAt = null;
    }
}
