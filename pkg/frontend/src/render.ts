/** Pure scene construction for the canvas views (no DOM access here). */

import type { VelocitySample } from "./state.js";
import type { FrameEvent, Vec3 } from "./types.js";
import { KEYPOINT_NAMES, N_KEYPOINTS } from "./types.js";

export interface Polyline {
  points: [number, number][];
  color: string;
  width: number;
  dash?: number[];
}

export interface Dot {
  x: number;
  y: number;
  r: number;
  color: string;
}

export interface Label {
  x: number;
  y: number;
  text: string;
  color: string;
}

export interface Scene {
  polylines: Polyline[];
  dots: Dot[];
  labels: Label[];
}

export type ViewPlane = "side" | "top";

/** Limb segments drawable from the streamed keypoints (indices into KEYPOINT_NAMES). */
export const SKELETON_EDGES: [number, number][] = [
  [0, 2], // l_elbow -> l_wrist
  [1, 3], // r_elbow -> r_wrist
  [4, 6], // l_knee -> l_ankle
  [5, 7], // r_knee -> r_ankle
];

/** Keypoint indices linked to the base marker to sketch torso and thighs. */
export const BASE_LINKS: number[] = [0, 1, 4, 5];

const KEYPOINT_COLORS = [
  "#2e8b57",
  "#3cb371",
  "#66cdaa",
  "#8fbc8f",
  "#228b22",
  "#32cd32",
  "#006400",
  "#2f4f4f",
];

const BONE_COLOR = "#4477aa";
const BASE_COLOR = "#cc6677";
const GROUND_COLOR = "#bbbbbb";

/** Half-extent (metres) of the square world window kept centred on the base. */
export const VIEW_HALF_EXTENT = 1.2;

export interface Viewport {
  width: number;
  height: number;
}

/** Orthographic projection of a world point onto the chosen plane. */
export function project(p: Vec3, plane: ViewPlane): [number, number] {
  return plane === "side" ? [p[0], p[2]] : [p[0], p[1]];
}

/**
 * World->pixel mapping centred on `center`, y-up flipped into screen space,
 * uniform scale so `VIEW_HALF_EXTENT` metres fit the smaller viewport axis.
 */
export function worldToPixel(center: [number, number], vp: Viewport): (pt: [number, number]) => [number, number] {
  const scale = Math.min(vp.width, vp.height) / (2 * VIEW_HALF_EXTENT);
  return ([x, y]) => [vp.width / 2 + (x - center[0]) * scale, vp.height / 2 - (y - center[1]) * scale];
}

/** Stick-figure view of the most recent frame. */
export function skeletonScene(frame: FrameEvent, plane: ViewPlane, vp: Viewport): Scene {
  const center = project(frame.base_pos, plane);
  const toPx = worldToPixel(center, vp);
  const pts = frame.keypoints_world.map((p) => toPx(project(p, plane)));
  const basePx = toPx(center);

  const polylines: Polyline[] = SKELETON_EDGES.map(([a, b]) => ({
    points: [pts[a], pts[b]],
    color: BONE_COLOR,
    width: 3,
  }));
  for (const k of BASE_LINKS) {
    polylines.push({ points: [basePx, pts[k]], color: BONE_COLOR, width: 2, dash: [4, 3] });
  }
  if (plane === "side") {
    const ground = toPx([center[0] - VIEW_HALF_EXTENT, 0]);
    const groundEnd = toPx([center[0] + VIEW_HALF_EXTENT, 0]);
    polylines.push({ points: [ground, groundEnd], color: GROUND_COLOR, width: 1 });
  }

  const dots: Dot[] = pts.map(([x, y], k) => ({ x, y, r: 4, color: KEYPOINT_COLORS[k] }));
  dots.push({ x: basePx[0], y: basePx[1], r: 5, color: BASE_COLOR });

  return { polylines, dots, labels: [] };
}

/** Trailing keypoint paths (one polyline per keypoint, newest end dotted). */
export function trailsScene(trails: Vec3[][], plane: ViewPlane, vp: Viewport): Scene {
  const polylines: Polyline[] = [];
  const dots: Dot[] = [];
  if (!trails.length || !trails[0].length) return { polylines, dots, labels: [] };

  const last = trails.map((t) => t[t.length - 1]);
  const centerWorld: Vec3 = [
    last.reduce((s, p) => s + p[0], 0) / last.length,
    last.reduce((s, p) => s + p[1], 0) / last.length,
    last.reduce((s, p) => s + p[2], 0) / last.length,
  ];
  const toPx = worldToPixel(project(centerWorld, plane), vp);

  for (let k = 0; k < Math.min(trails.length, N_KEYPOINTS); k++) {
    const pts = trails[k].map((p) => toPx(project(p, plane)));
    if (pts.length > 1) polylines.push({ points: pts, color: KEYPOINT_COLORS[k], width: 2 });
    const head = pts[pts.length - 1];
    dots.push({ x: head[0], y: head[1], r: 4, color: KEYPOINT_COLORS[k] });
  }
  return { polylines, dots, labels: [] };
}

const CHANNELS: { name: string; color: string }[] = [
  { name: "vx", color: "#cc3311" },
  { name: "vy", color: "#0077bb" },
  { name: "yaw", color: "#009988" },
];

/** y-axis window (m/s, rad/s) covering the full command ranges with headroom. */
export const VELOCITY_Y_RANGE: [number, number] = [-0.6, 1.8];

/** Commanded (dashed) vs generated (solid) velocity traces per channel. */
export function velocityScene(series: VelocitySample[], vp: Viewport): Scene {
  const [yLo, yHi] = VELOCITY_Y_RANGE;
  const pad = 24;
  const plotW = Math.max(1, vp.width - 2 * pad);
  const plotH = Math.max(1, vp.height - 2 * pad);
  const toX = (i: number) => pad + (series.length <= 1 ? 0 : (i / (series.length - 1)) * plotW);
  const toY = (v: number) => pad + (1 - (v - yLo) / (yHi - yLo)) * plotH;

  const polylines: Polyline[] = [
    { points: [[pad, toY(0)], [pad + plotW, toY(0)]], color: GROUND_COLOR, width: 1 },
  ];
  const labels: Label[] = [];

  for (let c = 0; c < CHANNELS.length; c++) {
    const { name, color } = CHANNELS[c];
    if (series.length) {
      polylines.push({
        points: series.map((s, i) => [toX(i), toY(s.commanded[c])]),
        color,
        width: 1,
        dash: [5, 4],
      });
      polylines.push({
        points: series.map((s, i) => [toX(i), toY(s.generated[c])]),
        color,
        width: 2,
      });
    }
    labels.push({ x: pad + 6 + 54 * c, y: pad - 8, text: name, color });
  }
  return { polylines, dots: [], labels };
}

/** Legend text for the keypoint palette (index-aligned with stream order). */
export function keypointLegend(): { name: string; color: string }[] {
  return KEYPOINT_NAMES.map((name, k) => ({ name, color: KEYPOINT_COLORS[k] }));
}
