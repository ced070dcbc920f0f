/** Resumable event stream: tracks the last seen seq, deduplicates replays,
 * and reconnects from exactly where it left off, so killing and reopening
 * the connection at any point reconstructs the identical event sequence. */

import type { ApiClient, StreamHandle } from "./api.js";
import type { AgentEvent } from "./types.js";

export type StreamState = "idle" | "streaming" | "closed" | "error";

export class ResumableStream {
  private lastSeq = -1;
  private handle: StreamHandle | null = null;
  private stateValue: StreamState = "idle";
  private lastError: unknown = null;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly sink: (event: AgentEvent) => void,
  ) {}

  get state(): StreamState {
    return this.stateValue;
  }

  get error(): unknown {
    return this.lastError;
  }

  get nextSeq(): number {
    return this.lastSeq + 1;
  }

  /** Open (or reopen) the stream from the next unseen seq. Resolves at the
   * turn boundary; events already seen are dropped by seq. */
  async follow(): Promise<void> {
    this.stateValue = "streaming";
    this.handle = this.api.streamEvents(this.sessionId, this.nextSeq, (event) => {
      if (event.seq <= this.lastSeq) return; // dedup on replay overlap
      this.lastSeq = event.seq;
      this.sink(event);
    });
    try {
      await this.handle.done;
      this.stateValue = "closed";
    } catch (err) {
      this.lastError = err;
      this.stateValue = "error";
      throw err;
    } finally {
      this.handle = null;
    }
  }

  /** Simulate a dropped connection (or close deliberately). */
  kill(): void {
    this.handle?.abort();
    this.handle = null;
    this.stateValue = "closed";
  }
}
