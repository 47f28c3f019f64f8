import { describe, expect, it } from "vitest";
import { clampCommand, COMMAND_RANGES, inRange } from "../src/ranges.js";

describe("command clamping", () => {
  it("mirrors the service bounds", () => {
    expect(COMMAND_RANGES.vx).toEqual([0.0, 1.5]);
    expect(COMMAND_RANGES.vy).toEqual([-0.3, 0.3]);
    expect(COMMAND_RANGES.yaw_rate).toEqual([-0.3, 0.3]);
  });

  it("passes in-range values through unchanged", () => {
    const c = { vx: 0.7, vy: -0.1, yaw_rate: 0.25 };
    expect(clampCommand(c)).toEqual(c);
  });

  it("clamps each field to its own bounds", () => {
    expect(clampCommand({ vx: 99, vy: -99, yaw_rate: 0.31 })).toEqual({
      vx: 1.5,
      vy: -0.3,
      yaw_rate: 0.3,
    });
    expect(clampCommand({ vx: -0.4, vy: 0.4, yaw_rate: -5 })).toEqual({
      vx: 0.0,
      vy: 0.3,
      yaw_rate: -0.3,
    });
  });

  it("maps non-finite input to zero (a garbage command must read as stop)", () => {
    expect(clampCommand({ vx: NaN, vy: Infinity, yaw_rate: -Infinity })).toEqual({
      vx: 0,
      vy: 0,
      yaw_rate: 0,
    });
  });

  it("clamped output is always in range (randomized sweep)", () => {
    let x = 42;
    const rnd = () => {
      // xorshift: deterministic pseudo-random floats in [-10, 10)
      x ^= x << 13;
      x ^= x >> 17;
      x ^= x << 5;
      return ((x >>> 0) / 2 ** 32) * 20 - 10;
    };
    for (let i = 0; i < 2000; i++) {
      const c = clampCommand({ vx: rnd(), vy: rnd(), yaw_rate: rnd() });
      expect(inRange(c)).toBe(true);
    }
  });
});
