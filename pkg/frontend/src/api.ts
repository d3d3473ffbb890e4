/** Fetch clients for the session service and the detection relay. */

import type {
  CommandResponse,
  CommandVariant,
  DetectionAck,
  DocumentJson,
  OverviewJson,
  SessionDescriptor,
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

async function asJson<T>(res: Response): Promise<T> {
  const text = await res.text();
  if (!res.ok) {
    let detail = text;
    try {
      const body = JSON.parse(text) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body, keep raw text
    }
    throw new ApiError(res.status, detail || `HTTP ${res.status}`);
  }
  return JSON.parse(text) as T;
}

export interface CreateSessionOptions {
  trigger_mode?: string;
  devices?: string[];
  seed?: number;
  arm_window_ms?: number;
}

export class SessionApi {
  constructor(readonly base: string) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async registerDocument(text: string): Promise<string> {
    const res = await fetch(this.url("/documents"), { method: "POST", body: text });
    const body = await asJson<{ document_id: string }>(res);
    return body.document_id;
  }

  async createSession(
    documentId: string,
    options: CreateSessionOptions = {},
  ): Promise<SessionDescriptor> {
    const res = await fetch(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify({ document_id: documentId, ...options }),
    });
    return asJson<SessionDescriptor>(res);
  }

  async command(sessionId: string, variant: CommandVariant): Promise<CommandResponse> {
    const res = await fetch(this.url(`/sessions/${sessionId}/command`), {
      method: "POST",
      body: JSON.stringify({ variant }),
    });
    return asJson<CommandResponse>(res);
  }

  async state(sessionId: string): Promise<SessionDescriptor> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/state`)));
  }

  /** Read-only where-am-I view; unlike the overview command it logs nothing. */
  async overview(sessionId: string): Promise<OverviewJson> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/overview`)));
  }

  async sessionDocument(sessionId: string): Promise<DocumentJson> {
    return asJson(await fetch(this.url(`/sessions/${sessionId}/document`)));
  }

  async logText(sessionId: string): Promise<string> {
    const res = await fetch(this.url(`/sessions/${sessionId}/log`));
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return res.text();
  }

  eventsUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/events`);
  }
}

export class RelayApi {
  constructor(
    readonly base: string,
    readonly deviceId: string,
  ) {}

  /**
   * Submit one simulated sighting. detected_at is epoch milliseconds on the
   * shared wall clock; the engine checks it against the arm window, so the
   * stamp must be taken when the block is shown, not when the poll lands.
   */
  async submitDetection(tagId: string, detectedAt: number): Promise<DetectionAck> {
    const res = await fetch(this.base.replace(/\/$/, "") + "/detections", {
      method: "POST",
      body: JSON.stringify({
        device_id: this.deviceId,
        tag_id: tagId,
        detected_at: detectedAt,
      }),
    });
    return asJson<DetectionAck>(res);
  }
}
