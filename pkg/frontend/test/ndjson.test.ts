import { describe, expect, it, vi } from "vitest";
import { createNdjsonParser } from "../src/ndjson.js";

describe("ndjson parser", () => {
  it("emits one object per line regardless of chunk boundaries", () => {
    const got: unknown[] = [];
    const p = createNdjsonParser((o) => got.push(o));
    p.push('{"a": 1}\n{"b"');
    p.push(": 2}\n{"); // split mid-object
    p.push('"c": 3}\n');
    expect(got).toEqual([{ a: 1 }, { b: 2 }, { c: 3 }]);
  });

  it("buffers a partial trailing line until its newline arrives", () => {
    const got: unknown[] = [];
    const p = createNdjsonParser((o) => got.push(o));
    p.push('{"frame": 7');
    expect(got).toEqual([]);
    p.push("}\n");
    expect(got).toEqual([{ frame: 7 }]);
  });

  it("flush drains an unterminated final line", () => {
    const got: unknown[] = [];
    const p = createNdjsonParser((o) => got.push(o));
    p.push('{"x": 1}');
    p.flush();
    expect(got).toEqual([{ x: 1 }]);
  });

  it("skips malformed lines with a warning and keeps going", () => {
    const got: unknown[] = [];
    const warn = vi.fn();
    const p = createNdjsonParser((o) => got.push(o), warn);
    p.push('{"ok": 1}\nnot json at all\n{"ok": 2}\n');
    expect(got).toEqual([{ ok: 1 }, { ok: 2 }]);
    expect(warn).toHaveBeenCalledTimes(1);
    expect(warn.mock.calls[0][0]).toContain("malformed");
  });

  it("skips non-object JSON lines (numbers, arrays, null)", () => {
    const got: unknown[] = [];
    const warn = vi.fn();
    const p = createNdjsonParser((o) => got.push(o), warn);
    p.push("42\n[1,2]\nnull\n{\"keep\": true}\n");
    expect(got).toEqual([{ keep: true }]);
    expect(warn).toHaveBeenCalledTimes(3);
  });

  it("ignores blank lines", () => {
    const got: unknown[] = [];
    const warn = vi.fn();
    const p = createNdjsonParser((o) => got.push(o), warn);
    p.push("\n\n  \n{\"a\": 1}\n\n");
    expect(got).toEqual([{ a: 1 }]);
    expect(warn).not.toHaveBeenCalled();
  });
});
