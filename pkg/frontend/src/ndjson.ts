/** Incremental NDJSON decoder: feed arbitrary chunks, get one object per complete line. */

export interface NdjsonParser {
  push(chunk: string): void;
  /** Drain any trailing unterminated line (call once at end of stream). */
  flush(): void;
}

export function createNdjsonParser(
  onObject: (obj: Record<string, unknown>) => void,
  warn: (msg: string) => void = (m) => console.warn(m),
): NdjsonParser {
  let buf = "";

  function emitLine(line: string): void {
    const trimmed = line.trim();
    if (!trimmed) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(trimmed);
    } catch {
      warn(`skipping malformed stream line: ${trimmed.slice(0, 120)}`);
      return;
    }
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      warn(`skipping non-object stream line: ${trimmed.slice(0, 120)}`);
      return;
    }
    onObject(parsed as Record<string, unknown>);
  }

  return {
    push(chunk: string) {
      buf += chunk;
      let nl: number;
      while ((nl = buf.indexOf("\n")) >= 0) {
        const line = buf.slice(0, nl);
        buf = buf.slice(nl + 1);
        emitLine(line);
      }
    },
    flush() {
      const rest = buf;
      buf = "";
      emitLine(rest);
    },
  };
}
