/** Wire types for the gmp steering service (NDJSON stream + JSON routes). */

export type Vec3 = [number, number, number];

/** Keypoint order used by the default humanoid model; world positions arrive in this order. */
export const KEYPOINT_NAMES = [
  "l_elbow",
  "r_elbow",
  "l_wrist",
  "r_wrist",
  "l_knee",
  "r_knee",
  "l_ankle",
  "r_ankle",
] as const;

export const N_KEYPOINTS = KEYPOINT_NAMES.length;

export interface PosePayload {
  v_base: Vec3;
  w_base: Vec3;
  q: number[];
  p_key: Vec3[];
  v_key: Vec3[];
  h_base: number;
}

/** One generated frame as it appears on the stream (one JSON line). */
export interface FrameEvent {
  v: number;
  frame: number;
  t: number;
  command: Vec3;
  pose: PosePayload;
  base_pos: Vec3;
  heading: number;
  keypoints_world: Vec3[];
  dropped?: number;
}

export interface SessionInfo {
  schema: string;
  id: string;
  frame_rate: number;
}

/** Response to a command post: what the server actually applied. */
export interface CommandAck {
  applied: { vx: number; vy: number; yaw_rate: number };
  clamped: Record<string, { requested: number; applied: number }>;
  effective_frame: number;
}

export interface SessionState {
  id: string;
  frame: number;
  command: Vec3;
  latest: FrameEvent | null;
  events: FrameEvent[];
  dropped: number;
  error: string | null;
}

export interface SessionLog {
  id: string;
  frames: number;
  commands: { frame: number; command: Vec3 }[];
  rate: number;
}

export interface HealthInfo {
  ok: boolean;
  sessions: number;
  schema: string;
}

function isVec3(x: unknown): x is Vec3 {
  return Array.isArray(x) && x.length === 3 && x.every((v) => typeof v === "number" && Number.isFinite(v));
}

function isVec3List(x: unknown, n: number): x is Vec3[] {
  return Array.isArray(x) && x.length === n && x.every(isVec3);
}

/** Structural check for stream events; anything failing is skipped by the consumer. */
export function isFrameEvent(x: unknown): x is FrameEvent {
  if (typeof x !== "object" || x === null) return false;
  const e = x as Record<string, unknown>;
  if (typeof e.frame !== "number" || !Number.isInteger(e.frame) || e.frame < 0) return false;
  if (typeof e.t !== "number" || !Number.isFinite(e.t)) return false;
  if (!isVec3(e.command)) return false;
  if (!isVec3(e.base_pos)) return false;
  if (typeof e.heading !== "number") return false;
  if (!isVec3List(e.keypoints_world, N_KEYPOINTS)) return false;
  const pose = e.pose as Record<string, unknown> | undefined;
  if (typeof pose !== "object" || pose === null) return false;
  if (!isVec3(pose.v_base) || !isVec3(pose.w_base)) return false;
  if (!Array.isArray(pose.q)) return false;
  if (typeof pose.h_base !== "number") return false;
  return true;
}
