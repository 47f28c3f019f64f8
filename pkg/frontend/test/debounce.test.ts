import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { createCommandSender, MIN_SEND_INTERVAL_MS, rateLimit } from "../src/debounce.js";
import type { Command } from "../src/ranges.js";
import { inRange } from "../src/ranges.js";

beforeEach(() => vi.useFakeTimers());
afterEach(() => vi.useRealTimers());

describe("rate limiter", () => {
  it("fires the first call immediately", () => {
    const fn = vi.fn();
    const limited = rateLimit<number>(fn, 50);
    limited(1);
    expect(fn).toHaveBeenCalledOnce();
    expect(fn).toHaveBeenCalledWith(1);
  });

  it("coalesces a burst into leading + trailing fire with the latest value", () => {
    const fn = vi.fn();
    const limited = rateLimit<number>(fn, 50);
    for (let i = 0; i < 30; i++) limited(i);
    expect(fn).toHaveBeenCalledTimes(1); // leading edge only so far
    vi.advanceTimersByTime(50);
    expect(fn).toHaveBeenCalledTimes(2);
    expect(fn).toHaveBeenLastCalledWith(29);
  });

  it("never exceeds 20 posts per second under continuous wiggle", () => {
    const fn = vi.fn();
    const limited = rateLimit<number>(fn, MIN_SEND_INTERVAL_MS);
    // One slider event every 5 ms for one second = 200 UI events.
    for (let i = 0; i < 200; i++) {
      limited(i);
      vi.advanceTimersByTime(5);
    }
    expect(fn.mock.calls.length).toBeLessThanOrEqual(21); // 20 Hz + leading edge
    vi.runAllTimers();
    expect(fn).toHaveBeenLastCalledWith(199); // final value always lands
  });

  it("spaced calls all pass through", () => {
    const fn = vi.fn();
    const limited = rateLimit<number>(fn, 50);
    limited(1);
    vi.advanceTimersByTime(60);
    limited(2);
    vi.advanceTimersByTime(60);
    limited(3);
    expect(fn.mock.calls.map((c) => c[0])).toEqual([1, 2, 3]);
  });

  it("cancel drops a pending trailing fire", () => {
    const fn = vi.fn();
    const limited = rateLimit<number>(fn, 50);
    limited(1);
    limited(2);
    limited.cancel();
    vi.runAllTimers();
    expect(fn).toHaveBeenCalledTimes(1);
  });
});

describe("command sender", () => {
  it("clamps before posting so out-of-range commands never leave the UI", () => {
    const posts: Command[] = [];
    const send = createCommandSender((c) => posts.push(c));
    send({ vx: 9, vy: -9, yaw_rate: 9 });
    vi.runAllTimers();
    expect(posts).toHaveLength(1);
    expect(posts[0]).toEqual({ vx: 1.5, vy: -0.3, yaw_rate: 0.3 });
    expect(inRange(posts[0])).toBe(true);
  });

  it("every post in a random wiggle is in range and rate-limited", () => {
    const posts: Command[] = [];
    const send = createCommandSender((c) => posts.push(c));
    let x = 7;
    const rnd = () => {
      x = (x * 1103515245 + 12345) % 2 ** 31;
      return (x / 2 ** 31) * 6 - 3;
    };
    for (let i = 0; i < 100; i++) {
      send({ vx: rnd(), vy: rnd(), yaw_rate: rnd() });
      vi.advanceTimersByTime(10);
    }
    vi.runAllTimers();
    expect(posts.length).toBeLessThanOrEqual(21);
    for (const p of posts) expect(inRange(p)).toBe(true);
  });
});
