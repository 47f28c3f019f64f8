/** Browser entry point: wires the service client, state, and canvas together. */

import { ServiceClient } from "./client.js";
import { createCommandSender } from "./debounce.js";
import { applyKey } from "./keyboard.js";
import type { Command } from "./ranges.js";
import { clampCommand, COMMAND_RANGES, commandsEqual } from "./ranges.js";
import type { Scene } from "./render.js";
import { keypointLegend, skeletonScene, trailsScene, velocityScene } from "./render.js";
import type { RenderMode } from "./state.js";
import { ConsoleState, TRAIL_FRAMES } from "./state.js";

const state = new ConsoleState();
let client: ServiceClient | null = null;
let stopStream: (() => void) | null = null;
let plane: "side" | "top" = "side";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const addrInput = $<HTMLInputElement>("addr");
const connectBtn = $<HTMLButtonElement>("connect");
const disconnectBtn = $<HTMLButtonElement>("disconnect");
const retryBtn = $<HTMLButtonElement>("retry");
const downloadBtn = $<HTMLButtonElement>("download-log");
const banner = $<HTMLDivElement>("banner");
const sessionLabel = $<HTMLSpanElement>("session-label");
const dropLabel = $<HTMLSpanElement>("drop-label");
const modeSelect = $<HTMLSelectElement>("mode");
const planeSelect = $<HTMLSelectElement>("plane");
const canvas = $<HTMLCanvasElement>("view");
const legendDiv = $<HTMLDivElement>("legend");

interface SliderRow {
  input: HTMLInputElement;
  ackedLabel: HTMLSpanElement;
}
const sliders: Record<keyof Command, SliderRow> = {
  vx: { input: $<HTMLInputElement>("vx"), ackedLabel: $<HTMLSpanElement>("vx-acked") },
  vy: { input: $<HTMLInputElement>("vy"), ackedLabel: $<HTMLSpanElement>("vy-acked") },
  yaw_rate: { input: $<HTMLInputElement>("yaw"), ackedLabel: $<HTMLSpanElement>("yaw-acked") },
};

for (const key of Object.keys(sliders) as (keyof Command)[]) {
  const [lo, hi] = COMMAND_RANGES[key];
  const { input } = sliders[key];
  input.min = String(lo);
  input.max = String(hi);
  input.step = "0.05";
  input.value = "0";
}

function setBanner(kind: "ok" | "warn" | "error", text: string): void {
  banner.className = `banner ${kind}`;
  banner.textContent = text;
  retryBtn.hidden = kind !== "error";
}

function refreshCommandDisplay(): void {
  // Sliders and readouts always show the last server-acknowledged value.
  for (const key of Object.keys(sliders) as (keyof Command)[]) {
    const { input, ackedLabel } = sliders[key];
    input.value = String(state.acked[key]);
    ackedLabel.textContent = state.acked[key].toFixed(2);
  }
}

const postCommand = createCommandSender((cmd) => {
  if (!client || !state.sessionId) return;
  client
    .sendCommand(state.sessionId, cmd)
    .then((ack) => {
      state.acked = { vx: ack.applied.vx, vy: ack.applied.vy, yaw_rate: ack.applied.yaw_rate };
      refreshCommandDisplay();
      const clampedKeys = Object.keys(ack.clamped);
      if (clampedKeys.length) {
        setBanner("warn", `server clamped ${clampedKeys.join(", ")}`);
      } else if (state.status === "streaming") {
        setBanner("ok", "streaming");
      }
    })
    .catch((err: Error) => {
      // Command failures surface in the banner but keep local state intact.
      setBanner("warn", `command failed: ${err.message}`);
    });
});

function requestCommand(cmd: Command): void {
  state.pending = clampCommand(cmd);
  postCommand(state.pending);
}

function disconnect(deleteRemote: boolean): void {
  postCommand.cancel();
  if (stopStream) {
    stopStream();
    stopStream = null;
  }
  if (deleteRemote && client && state.sessionId) {
    client.deleteSession(state.sessionId).catch(() => undefined);
  }
  state.sessionId = null;
  state.status = "closed";
  sessionLabel.textContent = "-";
}

async function connect(): Promise<void> {
  disconnect(true);
  state.clearFrames();
  state.status = "connecting";
  setBanner("ok", "connecting...");
  client = new ServiceClient(addrInput.value.trim() || "http://127.0.0.1:8731");
  try {
    // A reconnect always starts a fresh session: generation state is server-side.
    const info = await client.createSession();
    state.sessionId = info.id;
    state.frameRate = info.frame_rate;
    state.acked = { vx: 0, vy: 0, yaw_rate: 0 };
    refreshCommandDisplay();
    sessionLabel.textContent = `${info.id} @ ${info.frame_rate} Hz (${info.schema})`;
    stopStream = client.openStream(info.id, -1, {
      onEvent: (e) => {
        state.pushEvent(e);
        dropLabel.textContent = String(state.dropped);
      },
      onEnd: () => {
        if (state.status === "streaming") {
          state.status = "closed";
          setBanner("warn", "stream ended");
        }
      },
      onError: (err) => {
        state.status = "error";
        setBanner("error", `stream lost: ${err.message}`);
      },
    });
    state.status = "streaming";
    setBanner("ok", "streaming");
  } catch (err) {
    state.status = "error";
    setBanner("error", `connect failed: ${err instanceof Error ? err.message : String(err)}`);
  }
}

connectBtn.addEventListener("click", () => void connect());
retryBtn.addEventListener("click", () => void connect());
disconnectBtn.addEventListener("click", () => {
  disconnect(true);
  setBanner("ok", "disconnected");
});

downloadBtn.addEventListener("click", () => {
  if (!client || !state.sessionId) return;
  client
    .log(state.sessionId)
    .then((log) => {
      const blob = new Blob([JSON.stringify(log, null, 2)], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `session-${log.id}.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    })
    .catch((err: Error) => setBanner("warn", `log fetch failed: ${err.message}`));
});

modeSelect.addEventListener("change", () => {
  state.mode = modeSelect.value as RenderMode;
});
planeSelect.addEventListener("change", () => {
  plane = planeSelect.value as "side" | "top";
});

for (const key of Object.keys(sliders) as (keyof Command)[]) {
  sliders[key].input.addEventListener("input", () => {
    requestCommand({ ...state.acked, ...state.pending, [key]: Number(sliders[key].input.value) });
  });
}

document.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement && ev.target.type === "text") return;
  const next = applyKey(state.pending, ev.key);
  if (next && !commandsEqual(next, state.pending)) {
    ev.preventDefault();
    requestCommand(next);
  }
});

legendDiv.innerHTML = keypointLegend()
  .map(({ name, color }) => `<span class="chip"><i style="background:${color}"></i>${name}</span>`)
  .join("");

const ctx = canvas.getContext("2d");

function drawScene(scene: Scene): void {
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const line of scene.polylines) {
    if (line.points.length < 2) continue;
    ctx.strokeStyle = line.color;
    ctx.lineWidth = line.width;
    ctx.setLineDash(line.dash ?? []);
    ctx.beginPath();
    ctx.moveTo(line.points[0][0], line.points[0][1]);
    for (let i = 1; i < line.points.length; i++) ctx.lineTo(line.points[i][0], line.points[i][1]);
    ctx.stroke();
  }
  ctx.setLineDash([]);
  for (const dot of scene.dots) {
    ctx.fillStyle = dot.color;
    ctx.beginPath();
    ctx.arc(dot.x, dot.y, dot.r, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.font = "12px sans-serif";
  for (const label of scene.labels) {
    ctx.fillStyle = label.color;
    ctx.fillText(label.text, label.x, label.y);
  }
}

function frameLoop(): void {
  const vp = { width: canvas.width, height: canvas.height };
  const latest = state.latest;
  let scene: Scene = { polylines: [], dots: [], labels: [] };
  if (latest) {
    if (state.mode === "skeleton") scene = skeletonScene(latest, plane, vp);
    else if (state.mode === "keypoint-trails") scene = trailsScene(state.trails(TRAIL_FRAMES), plane, vp);
    else scene = velocityScene(state.velocitySeries(), vp);
  }
  drawScene(scene);
  requestAnimationFrame(frameLoop);
}

refreshCommandDisplay();
setBanner("ok", "enter the service address and connect");
requestAnimationFrame(frameLoop);
