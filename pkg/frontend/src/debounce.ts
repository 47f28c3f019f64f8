/** Rate-limited command dispatch: at most one post per interval, last value wins. */

import type { Command } from "./ranges.js";
import { clampCommand } from "./ranges.js";

export const MIN_SEND_INTERVAL_MS = 50; // 20 Hz ceiling

export interface RateLimited<T> {
  (value: T): void;
  /** Cancel any pending trailing send. */
  cancel(): void;
}

/**
 * Leading + trailing rate limiter: the first call fires immediately; calls
 * inside the interval coalesce into one trailing fire with the latest value.
 */
export function rateLimit<T>(fn: (value: T) => void, intervalMs: number, now: () => number = Date.now): RateLimited<T> {
  let lastFire = -Infinity;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let queued: { value: T } | null = null;

  const fire = (value: T) => {
    lastFire = now();
    fn(value);
  };

  const limited = (value: T) => {
    queued = { value };
    if (timer !== null) return; // trailing fire already scheduled, it picks up `queued`
    const wait = lastFire + intervalMs - now();
    if (wait <= 0) {
      const v = queued.value;
      queued = null;
      fire(v);
    } else {
      timer = setTimeout(() => {
        timer = null;
        if (queued) {
          const v = queued.value;
          queued = null;
          fire(v);
        }
      }, wait);
    }
  };
  limited.cancel = () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
    }
    queued = null;
  };
  return limited;
}

/**
 * The single exit point for UI commands: clamps into the configured ranges
 * (so an out-of-range command can never leave the console) and rate-limits
 * posts to the service.
 */
export function createCommandSender(
  post: (cmd: Command) => void,
  intervalMs: number = MIN_SEND_INTERVAL_MS,
  now: () => number = Date.now,
): RateLimited<Command> {
  const limited = rateLimit(post, intervalMs, now);
  const sender = (cmd: Command) => limited(clampCommand(cmd));
  sender.cancel = limited.cancel;
  return sender;
}
