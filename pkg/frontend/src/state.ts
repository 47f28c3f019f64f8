/** Console state: bounded frame buffer, acknowledged command, view selectors. */

import type { Command } from "./ranges.js";
import { ZERO_COMMAND } from "./ranges.js";
import type { FrameEvent, Vec3 } from "./types.js";
import { isFrameEvent, N_KEYPOINTS } from "./types.js";

export const FRAME_BUFFER_CAP = 300;
export const TRAIL_FRAMES = 12;

export type RenderMode = "skeleton" | "keypoint-trails" | "velocity-plot";
export type ConnectionStatus = "idle" | "connecting" | "streaming" | "error" | "closed";

export interface VelocitySample {
  t: number;
  commanded: Vec3; // vx, vy, yaw_rate as requested
  generated: Vec3; // base-frame vx, vy and yaw rate actually produced
}

export class ConsoleState {
  sessionId: string | null = null;
  frameRate = 50;
  status: ConnectionStatus = "idle";
  statusDetail = "";
  mode: RenderMode = "keypoint-trails";
  /** Last server-acknowledged command — the value the UI displays. */
  acked: Command = { ...ZERO_COMMAND };
  /** Local slider/keyboard value not yet acknowledged. */
  pending: Command = { ...ZERO_COMMAND };
  dropped = 0;

  private frames: FrameEvent[] = [];

  /** Append a stream event; malformed payloads are skipped with a warning. */
  pushEvent(raw: unknown, warn: (msg: string) => void = (m) => console.warn(m)): boolean {
    if (!isFrameEvent(raw)) {
      warn(`skipping malformed frame event: ${JSON.stringify(raw)?.slice(0, 120)}`);
      return false;
    }
    if (raw.dropped) this.dropped += raw.dropped;
    this.frames.push(raw);
    if (this.frames.length > FRAME_BUFFER_CAP) {
      this.frames.splice(0, this.frames.length - FRAME_BUFFER_CAP);
    }
    return true;
  }

  get frameCount(): number {
    return this.frames.length;
  }

  get latest(): FrameEvent | null {
    return this.frames.length ? this.frames[this.frames.length - 1] : null;
  }

  get buffer(): readonly FrameEvent[] {
    return this.frames;
  }

  clearFrames(): void {
    this.frames = [];
    this.dropped = 0;
  }

  /** World-space positions of each keypoint over the trailing `n` frames (oldest first). */
  trails(n: number = TRAIL_FRAMES): Vec3[][] {
    const tail = this.frames.slice(-n);
    const out: Vec3[][] = [];
    for (let k = 0; k < N_KEYPOINTS; k++) {
      out.push(tail.map((f) => f.keypoints_world[k]));
    }
    return out;
  }

  /** Commanded vs generated planar velocity over the trailing `n` frames. */
  velocitySeries(n: number = FRAME_BUFFER_CAP): VelocitySample[] {
    return this.frames.slice(-n).map((f) => ({
      t: f.t,
      commanded: f.command,
      generated: [f.pose.v_base[0], f.pose.v_base[1], f.pose.w_base[2]],
    }));
  }
}
