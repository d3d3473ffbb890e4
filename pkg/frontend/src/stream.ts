/**
 * Event-stream reader over fetch.
 *
 * The session service streams `event: snapshot` once, then `event: entry`
 * per committed log record, with `: keepalive` comments in between. Reading
 * through fetch keeps one implementation working in the browser and under
 * node test runners, neither of which share an EventSource.
 */

import type { EntryEvent, SessionSnapshot } from "./types.js";

export interface StreamHandlers {
  onSnapshot: (snapshot: SessionSnapshot) => void;
  onEntry: (entry: EntryEvent) => void;
  /** Called once when the stream dies for any reason other than close(). */
  onDown: (reason: string) => void;
}

export class EventStream {
  private readonly aborter = new AbortController();
  private closed = false;
  private downReported = false;

  constructor(
    readonly url: string,
    private readonly handlers: StreamHandlers,
  ) {}

  /** Resolves when the stream terminates; rejection never escapes. */
  async run(): Promise<void> {
    try {
      const res = await fetch(this.url, {
        signal: this.aborter.signal,
        headers: { accept: "text/event-stream" },
      });
      if (!res.ok || res.body === null) {
        this.down(`stream rejected with status ${res.status}`);
        return;
      }
      const reader = res.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let cut: number;
        while ((cut = buffer.indexOf("\n\n")) >= 0) {
          const frame = buffer.slice(0, cut);
          buffer = buffer.slice(cut + 2);
          this.dispatch(frame);
        }
      }
      this.down("stream ended");
    } catch (err) {
      this.down(`stream failed: ${err instanceof Error ? err.message : String(err)}`);
    }
  }

  private dispatch(frame: string): void {
    let event = "";
    let data = "";
    for (const line of frame.split("\n")) {
      if (line.startsWith(":")) continue;
      if (line.startsWith("event:")) event = line.slice("event:".length).trim();
      else if (line.startsWith("data:")) data += line.slice("data:".length).trim();
    }
    if (!event || !data) return;
    if (event === "snapshot") {
      this.handlers.onSnapshot(JSON.parse(data) as SessionSnapshot);
    } else if (event === "entry") {
      this.handlers.onEntry(JSON.parse(data) as EntryEvent);
    }
  }

  /** Intentional shutdown: suppresses the onDown callback. */
  close(): void {
    this.closed = true;
    this.aborter.abort();
  }

  private down(reason: string): void {
    if (this.closed || this.downReported) return;
    this.downReported = true;
    this.handlers.onDown(reason);
  }
}

/** Open and start reading; the caller keeps the handle to close it. */
export function openStream(url: string, handlers: StreamHandlers): EventStream {
  const stream = new EventStream(url, handlers);
  void stream.run();
  return stream;
}
