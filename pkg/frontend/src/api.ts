/** HTTP client for the dbcopilot service. The UI has no database or model
 * access of its own: everything goes through these endpoints. */

import type {
  AgentEvent,
  DatabaseInfo,
  SessionDescriptor,
  SessionSchema,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface StreamHandle {
  /** Resolves when the server closes the stream (turn boundary). */
  done: Promise<void>;
  abort(): void;
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) detail = body.error;
  } catch {
    // not JSON; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as T;
  }

  listDatabases(): Promise<DatabaseInfo[]> {
    return this.request("/databases");
  }

  createSession(dbRef: string): Promise<SessionDescriptor> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ db_ref: dbRef }),
    });
  }

  getSession(sessionId: string): Promise<SessionDescriptor> {
    return this.request(`/sessions/${sessionId}`);
  }

  getSchema(sessionId: string): Promise<SessionSchema> {
    return this.request(`/sessions/${sessionId}/schema`);
  }

  async postMessage(sessionId: string, text: string): Promise<number> {
    const body = await this.request<{ seq_start: number }>(
      `/sessions/${sessionId}/messages`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
    return body.seq_start;
  }

  /** Read the ndjson event stream, invoking onEvent per line. With
   * follow=true the promise settles when the session goes quiescent. */
  streamEvents(
    sessionId: string,
    fromSeq: number,
    onEvent: (event: AgentEvent) => void,
    options: { follow?: boolean } = {},
  ): StreamHandle {
    const follow = options.follow ?? true;
    const controller = new AbortController();
    const url =
      `${this.baseUrl}/sessions/${sessionId}/events` +
      `?from_seq=${fromSeq}&follow=${follow}`;

    const done = (async () => {
      const response = await this.fetchImpl(url, { signal: controller.signal });
      if (!response.ok) throw await errorFrom(response);
      if (!response.body) throw new ApiError(0, "response has no body");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done: finished, value } = await reader.read();
        if (finished) break;
        buffer += decoder.decode(value, { stream: true });
        let newline = buffer.indexOf("\n");
        while (newline >= 0) {
          const line = buffer.slice(0, newline).trim();
          buffer = buffer.slice(newline + 1);
          if (line) onEvent(JSON.parse(line) as AgentEvent);
          newline = buffer.indexOf("\n");
        }
      }
      const tail = buffer.trim();
      if (tail) onEvent(JSON.parse(tail) as AgentEvent);
    })();

    return { done, abort: () => controller.abort() };
  }

  /** Convenience: collect one turn's worth of events into an array. */
  async collectEvents(
    sessionId: string,
    fromSeq: number,
    options: { follow?: boolean } = {},
  ): Promise<AgentEvent[]> {
    const events: AgentEvent[] = [];
    await this.streamEvents(sessionId, fromSeq, (e) => events.push(e), options)
      .done;
    return events;
  }
}
