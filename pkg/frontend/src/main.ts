/** DOM wiring: edit canvas with stroke capture, request form, progress bar,
 * frame playback with a toggleable stroke overlay, and a dev-mode
 * determinism check (replay same seed, compare frame hashes). */

import { StudioClient } from "./api.js";
import { drawStroke, drawStrokes } from "./draw.js";
import { FramePlayer } from "./player.js";
import { hashFrames, Studio } from "./studio.js";
import type { JobStatus, Point } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function pickScale(width: number, height: number): number {
  return Math.max(1, Math.floor(256 / Math.max(width, height)));
}

async function loadImage(src: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("image failed to load"));
    img.src = src;
  });
}

async function boot(): Promise<void> {
  const client = new StudioClient();
  const info = await client.canvas();
  const scale = pickScale(info.width, info.height);
  const studio = new Studio(client, info, scale);

  const editCanvas = el<HTMLCanvasElement>("edit-canvas");
  const playCanvas = el<HTMLCanvasElement>("play-canvas");
  editCanvas.width = playCanvas.width = studio.displayWidth;
  editCanvas.height = playCanvas.height = studio.displayHeight;
  const editCtx = editCanvas.getContext("2d")!;
  const playCtx = playCanvas.getContext("2d")!;
  editCtx.imageSmoothingEnabled = false;
  playCtx.imageSmoothingEnabled = false;

  const caption = el<HTMLInputElement>("caption");
  const seed = el<HTMLInputElement>("seed");
  const guidance = el<HTMLInputElement>("guidance");
  const generate = el<HTMLButtonElement>("generate");
  const undo = el<HTMLButtonElement>("undo");
  const clear = el<HTMLButtonElement>("clear");
  const overlayToggle = el<HTMLInputElement>("overlay-toggle");
  const progress = el<HTMLProgressElement>("progress");
  const status = el<HTMLElement>("status");
  const errorBox = el<HTMLElement>("error");
  const devPanel = el<HTMLElement>("dev-panel");
  const replay = el<HTMLButtonElement>("replay");
  const hashBox = el<HTMLElement>("hash");

  const baseImage = await loadImage(`data:image/png;base64,${info.image}`);
  let playbackFrames: HTMLImageElement[] = [];
  let playbackBytes: ArrayBuffer[] = [];
  let lastHash = "";
  let player: FramePlayer | null = null;

  const devMode = new URLSearchParams(location.search).has("dev");
  devPanel.hidden = !devMode;

  function redrawEdit(): void {
    editCtx.clearRect(0, 0, editCanvas.width, editCanvas.height);
    editCtx.drawImage(baseImage, 0, 0, editCanvas.width, editCanvas.height);
    drawStrokes(editCtx, studio.store.strokes);
    if (studio.store.active !== null) {
      drawStroke(editCtx, studio.store.active);
    }
  }

  function drawPlayback(index: number): void {
    if (playbackFrames.length === 0) {
      return;
    }
    playCtx.clearRect(0, 0, playCanvas.width, playCanvas.height);
    playCtx.drawImage(playbackFrames[index], 0, 0, playCanvas.width, playCanvas.height);
    if (studio.showOverlay) {
      drawStrokes(playCtx, studio.store.strokes);
    }
  }

  function showError(message: string): void {
    errorBox.textContent = message;
    errorBox.hidden = message === "";
  }

  function pointerPoint(ev: PointerEvent): Point {
    const rect = editCanvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  editCanvas.addEventListener("pointerdown", (ev) => {
    ev.preventDefault();
    editCanvas.setPointerCapture(ev.pointerId);
    showError("");
    if (!studio.store.begin(pointerPoint(ev))) {
      showError("stroke limit reached (8); clear or undo first");
      return;
    }
    redrawEdit();
  });

  editCanvas.addEventListener("pointermove", (ev) => {
    if (studio.store.active !== null) {
      studio.store.extend(pointerPoint(ev));
      redrawEdit();
    }
  });

  editCanvas.addEventListener("pointerup", () => {
    const discarded = studio.store.finish();
    if (discarded === "single-point") {
      showError("click and drag to draw a stroke (a single click is ignored)");
    }
    redrawEdit();
  });

  undo.addEventListener("click", () => {
    studio.store.undo();
    redrawEdit();
  });

  clear.addEventListener("click", () => {
    studio.store.clear();
    redrawEdit();
  });

  overlayToggle.addEventListener("change", () => {
    studio.showOverlay = overlayToggle.checked;
    if (player !== null) {
      player.tick();
    }
  });

  async function fetchFrames(job: JobStatus): Promise<void> {
    playbackBytes = [];
    playbackFrames = [];
    for (const rel of job.frames) {
      const res = await fetch(client.frameUrl(rel));
      const bytes = await res.arrayBuffer();
      playbackBytes.push(bytes);
      const blob = new Blob([bytes], { type: "image/png" });
      playbackFrames.push(await loadImage(URL.createObjectURL(blob)));
    }
  }

  async function runGeneration(): Promise<void> {
    generate.disabled = true;
    status.textContent = "submitting...";
    try {
      const job = await studio.submit(
        {
          caption: caption.value,
          seed: seed.value,
          guidance: guidance.value === "" ? undefined : Number(guidance.value),
        },
        {
          onProgress: (step, total, state) => {
            progress.max = total;
            progress.value = step;
            status.textContent = `${state} ${step}/${total}`;
          },
          onError: showError,
        },
      );
      if (job === null) {
        status.textContent = "idle";
        return;
      }
      seed.value = String(job.seed);
      status.textContent = `done (seed ${job.seed})`
        + (studio.echoOk === false ? "; warning: stroke echo mismatch" : "");
      if (job.warnings.length > 0) {
        showError(job.warnings.join("; "));
      }
      await fetchFrames(job);
      player?.stop();
      player = new FramePlayer(playbackFrames.length, drawPlayback);
      player.start();
      if (devMode) {
        const digest = await hashFrames(playbackBytes);
        hashBox.textContent = lastHash === ""
          ? `hash ${digest.slice(0, 16)}`
          : `hash ${digest.slice(0, 16)} (${digest === lastHash ? "matches" : "differs from"} previous)`;
        lastHash = digest;
      }
    } finally {
      generate.disabled = false;
    }
  }

  generate.addEventListener("click", () => void runGeneration());
  replay.addEventListener("click", () => void runGeneration());

  redrawEdit();
  status.textContent = `model canvas ${info.width}x${info.height}, ${info.frames} frames`;
}

void boot().catch((err) => {
  const box = document.getElementById("error");
  if (box !== null) {
    box.textContent = `failed to start: ${err}`;
    (box as HTMLElement).hidden = false;
  }
});
