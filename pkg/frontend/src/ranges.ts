/** Command bounds mirrored from the service; the UI clamps before every send. */

export interface Command {
  vx: number;
  vy: number;
  yaw_rate: number;
}

export const COMMAND_RANGES: Record<keyof Command, [number, number]> = {
  vx: [0.0, 1.5],
  vy: [-0.3, 0.3],
  yaw_rate: [-0.3, 0.3],
};

export const ZERO_COMMAND: Command = { vx: 0, vy: 0, yaw_rate: 0 };

function clip(v: number, lo: number, hi: number): number {
  if (!Number.isFinite(v)) return 0;
  return Math.min(hi, Math.max(lo, v));
}

/** Clamp every field into its configured range (non-finite values become 0). */
export function clampCommand(c: Command): Command {
  return {
    vx: clip(c.vx, ...COMMAND_RANGES.vx),
    vy: clip(c.vy, ...COMMAND_RANGES.vy),
    yaw_rate: clip(c.yaw_rate, ...COMMAND_RANGES.yaw_rate),
  };
}

export function inRange(c: Command): boolean {
  return (Object.keys(COMMAND_RANGES) as (keyof Command)[]).every((k) => {
    const [lo, hi] = COMMAND_RANGES[k];
    return c[k] >= lo && c[k] <= hi;
  });
}

export function commandsEqual(a: Command, b: Command): boolean {
  return a.vx === b.vx && a.vy === b.vy && a.yaw_rate === b.yaw_rate;
}
