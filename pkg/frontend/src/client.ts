/** Thin fetch-based client for the steering service HTTP API. */

import { createNdjsonParser } from "./ndjson.js";
import type { Command } from "./ranges.js";
import type { CommandAck, FrameEvent, HealthInfo, SessionInfo, SessionLog, SessionState } from "./types.js";
import { isFrameEvent } from "./types.js";

export interface StreamHandlers {
  onEvent: (e: FrameEvent) => void;
  onEnd?: () => void;
  onError?: (err: Error) => void;
  warn?: (msg: string) => void;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ServiceClient {
  readonly baseUrl: string;

  constructor(
    baseUrl: string,
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await res.text();
    if (!res.ok) {
      let detail = text.slice(0, 200);
      try {
        const body = JSON.parse(text);
        detail = body.error ?? body.detail ?? detail;
      } catch {
        /* keep raw text */
      }
      throw new ServiceError(`${res.status}: ${detail}`, res.status);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/healthz");
  }

  createSession(): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: "{}",
    });
  }

  sendCommand(sid: string, cmd: Command): Promise<CommandAck> {
    return this.request<CommandAck>(`/sessions/${sid}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cmd),
    });
  }

  state(sid: string, since?: number): Promise<SessionState> {
    const qs = since === undefined ? "" : `?since=${since}`;
    return this.request<SessionState>(`/sessions/${sid}/state${qs}`);
  }

  log(sid: string): Promise<SessionLog> {
    return this.request<SessionLog>(`/sessions/${sid}/log`);
  }

  deleteSession(sid: string): Promise<{ deleted: string }> {
    return this.request<{ deleted: string }>(`/sessions/${sid}`, { method: "DELETE" });
  }

  /**
   * Subscribe to the session's NDJSON frame stream. Events failing the
   * structural check are skipped with a warning. Returns a stop function
   * that aborts the underlying request.
   */
  openStream(sid: string, since: number, handlers: StreamHandlers): () => void {
    const controller = new AbortController();
    const warn = handlers.warn ?? ((m: string) => console.warn(m));
    const parser = createNdjsonParser((obj) => {
      if (isFrameEvent(obj)) handlers.onEvent(obj);
      else warn(`skipping malformed frame event: ${JSON.stringify(obj).slice(0, 120)}`);
    }, warn);

    (async () => {
      const res = await this.fetchImpl(`${this.baseUrl}/sessions/${sid}/stream?since=${since}`, {
        signal: controller.signal,
      });
      if (!res.ok || !res.body) {
        throw new ServiceError(`stream failed: ${res.status}`, res.status);
      }
      const reader = res.body.getReader();
      const decoder = new TextDecoder();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        parser.push(decoder.decode(value, { stream: true }));
      }
      parser.flush();
      handlers.onEnd?.();
    })().catch((err: unknown) => {
      if (controller.signal.aborted) {
        handlers.onEnd?.();
        return;
      }
      handlers.onError?.(err instanceof Error ? err : new Error(String(err)));
    });

    return () => controller.abort();
  }
}
