/** Arrow-key steering: up/down nudges vx, left/right nudges yaw rate. */

import type { Command } from "./ranges.js";
import { clampCommand } from "./ranges.js";

export const VX_STEP = 0.1;
export const YAW_STEP = 0.05;

/** Returns the adjusted command for a key press, or null if the key is unbound. */
export function applyKey(cmd: Command, key: string): Command | null {
  switch (key) {
    case "ArrowUp":
      return clampCommand({ ...cmd, vx: cmd.vx + VX_STEP });
    case "ArrowDown":
      return clampCommand({ ...cmd, vx: cmd.vx - VX_STEP });
    case "ArrowLeft":
      return clampCommand({ ...cmd, yaw_rate: cmd.yaw_rate + YAW_STEP });
    case "ArrowRight":
      return clampCommand({ ...cmd, yaw_rate: cmd.yaw_rate - YAW_STEP });
    case " ":
      return { vx: 0, vy: 0, yaw_rate: 0 };
    default:
      return null;
  }
}
