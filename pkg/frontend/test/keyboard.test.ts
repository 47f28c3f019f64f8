import { describe, expect, it } from "vitest";
import { applyKey, VX_STEP, YAW_STEP } from "../src/keyboard.js";
import { COMMAND_RANGES, inRange, ZERO_COMMAND } from "../src/ranges.js";

describe("arrow-key steering", () => {
  it("up/down nudge vx by one step", () => {
    const up = applyKey({ ...ZERO_COMMAND }, "ArrowUp");
    expect(up?.vx).toBeCloseTo(VX_STEP, 12);
    const down = applyKey({ vx: 0.5, vy: 0, yaw_rate: 0 }, "ArrowDown");
    expect(down?.vx).toBeCloseTo(0.5 - VX_STEP, 12);
  });

  it("left/right nudge yaw rate", () => {
    const left = applyKey({ ...ZERO_COMMAND }, "ArrowLeft");
    expect(left?.yaw_rate).toBeCloseTo(YAW_STEP, 12);
    const right = applyKey({ ...ZERO_COMMAND }, "ArrowRight");
    expect(right?.yaw_rate).toBeCloseTo(-YAW_STEP, 12);
  });

  it("space stops the robot", () => {
    expect(applyKey({ vx: 1.2, vy: 0.2, yaw_rate: -0.1 }, " ")).toEqual(ZERO_COMMAND);
  });

  it("returns null for unbound keys", () => {
    expect(applyKey({ ...ZERO_COMMAND }, "a")).toBeNull();
    expect(applyKey({ ...ZERO_COMMAND }, "Enter")).toBeNull();
  });

  it("saturates at the range limits instead of escaping them", () => {
    let cmd = { ...ZERO_COMMAND };
    for (let i = 0; i < 40; i++) cmd = applyKey(cmd, "ArrowUp") ?? cmd;
    expect(cmd.vx).toBe(COMMAND_RANGES.vx[1]);
    for (let i = 0; i < 40; i++) cmd = applyKey(cmd, "ArrowDown") ?? cmd;
    expect(cmd.vx).toBe(COMMAND_RANGES.vx[0]);
    for (let i = 0; i < 40; i++) cmd = applyKey(cmd, "ArrowLeft") ?? cmd;
    expect(cmd.yaw_rate).toBe(COMMAND_RANGES.yaw_rate[1]);
    expect(inRange(cmd)).toBe(true);
  });
});
