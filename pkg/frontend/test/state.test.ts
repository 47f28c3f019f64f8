import { describe, expect, it, vi } from "vitest";
import { ConsoleState, FRAME_BUFFER_CAP, TRAIL_FRAMES } from "../src/state.js";
import type { FrameEvent, Vec3 } from "../src/types.js";
import { isFrameEvent, N_KEYPOINTS } from "../src/types.js";

export function makeFrame(frame: number, overrides: Partial<FrameEvent> = {}): FrameEvent {
  const kp: Vec3[] = Array.from({ length: N_KEYPOINTS }, (_, k) => [frame * 0.01 + k, k * 0.1, 0.5]);
  return {
    v: 1,
    frame,
    t: frame / 50,
    command: [0.5, 0, 0],
    pose: {
      v_base: [0.48, 0.01, 0],
      w_base: [0, 0, 0.02],
      q: new Array(21).fill(0),
      p_key: kp,
      v_key: kp.map(() => [0, 0, 0] as Vec3),
      h_base: 0.62,
    },
    base_pos: [frame * 0.01, 0, 0.62],
    heading: 0,
    keypoints_world: kp,
    ...overrides,
  };
}

describe("frame buffer", () => {
  it("accepts well-formed events and tracks the latest", () => {
    const s = new ConsoleState();
    expect(s.pushEvent(makeFrame(0))).toBe(true);
    expect(s.pushEvent(makeFrame(1))).toBe(true);
    expect(s.frameCount).toBe(2);
    expect(s.latest?.frame).toBe(1);
  });

  it("never exceeds the 300-frame cap and keeps the newest frames", () => {
    const s = new ConsoleState();
    for (let i = 0; i < 1000; i++) {
      s.pushEvent(makeFrame(i));
      expect(s.frameCount).toBeLessThanOrEqual(FRAME_BUFFER_CAP);
    }
    expect(s.frameCount).toBe(FRAME_BUFFER_CAP);
    expect(s.buffer[0].frame).toBe(1000 - FRAME_BUFFER_CAP);
    expect(s.latest?.frame).toBe(999);
  });

  it("skips malformed events with a warning and leaves the buffer intact", () => {
    const s = new ConsoleState();
    const warn = vi.fn();
    s.pushEvent(makeFrame(0), warn);
    expect(s.pushEvent({ frame: "x" }, warn)).toBe(false);
    expect(s.pushEvent(null, warn)).toBe(false);
    const noKeypoints = { ...makeFrame(1), keypoints_world: [] };
    expect(s.pushEvent(noKeypoints, warn)).toBe(false);
    expect(warn).toHaveBeenCalledTimes(3);
    expect(s.frameCount).toBe(1);
  });

  it("accumulates the dropped-frame counter from events", () => {
    const s = new ConsoleState();
    s.pushEvent(makeFrame(0));
    s.pushEvent(makeFrame(10, { dropped: 9 }));
    s.pushEvent(makeFrame(12, { dropped: 1 }));
    expect(s.dropped).toBe(10);
  });
});

describe("view selectors", () => {
  it("trails return one path per keypoint over the trailing 12 frames", () => {
    const s = new ConsoleState();
    for (let i = 0; i < 40; i++) s.pushEvent(makeFrame(i));
    const trails = s.trails();
    expect(trails).toHaveLength(N_KEYPOINTS);
    for (const path of trails) expect(path).toHaveLength(TRAIL_FRAMES);
    // Newest sample of keypoint 0 matches the newest frame's world position.
    expect(trails[0][TRAIL_FRAMES - 1]).toEqual(s.latest?.keypoints_world[0]);
    // Paths are in stream order: x grows with the frame index in makeFrame.
    expect(trails[0][0][0]).toBeLessThan(trails[0][TRAIL_FRAMES - 1][0]);
  });

  it("trails are shorter than 12 only when fewer frames exist", () => {
    const s = new ConsoleState();
    for (let i = 0; i < 5; i++) s.pushEvent(makeFrame(i));
    for (const path of s.trails()) expect(path).toHaveLength(5);
  });

  it("velocity series pairs the commanded values with generated v_base/w_base", () => {
    const s = new ConsoleState();
    s.pushEvent(makeFrame(0));
    const series = s.velocitySeries();
    expect(series).toHaveLength(1);
    expect(series[0].commanded).toEqual([0.5, 0, 0]);
    expect(series[0].generated).toEqual([0.48, 0.01, 0.02]);
  });
});

describe("frame event validation", () => {
  it("accepts the canonical frame", () => {
    expect(isFrameEvent(makeFrame(3))).toBe(true);
  });

  it.each([
    ["negative frame", { frame: -1 }],
    ["non-integer frame", { frame: 1.5 }],
    ["bad command arity", { command: [1, 2] as unknown as Vec3 }],
    ["non-finite t", { t: NaN }],
  ])("rejects %s", (_name, patch) => {
    expect(isFrameEvent({ ...makeFrame(0), ...patch })).toBe(false);
  });

  it("rejects frames whose pose lacks velocity fields", () => {
    const f = makeFrame(0) as unknown as Record<string, unknown>;
    f.pose = { q: [] };
    expect(isFrameEvent(f)).toBe(false);
  });
});
