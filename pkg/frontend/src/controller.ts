/**
 * Session controller: owns the API clients, the event stream, and the
 * model. Commands are serialized client-side so one session never has two
 * requests in flight, matching the engine's one-writer discipline.
 */

import { RelayApi, SessionApi } from "./api.js";
import { PlayerModel } from "./state.js";
import { EventStream, openStream } from "./stream.js";
import type { CommandVariant, OverviewJson } from "./types.js";

export interface ConnectConfig {
  serviceBase: string;
  relayBase: string;
  /** Create a fresh session on this document unless sessionId is given. */
  documentId?: string;
  sessionId?: string;
  deviceId?: string;
  triggerMode?: string;
}

export class PlayerController {
  /** Overview payload from the most recent overview command response. */
  overviewPanel: OverviewJson | null = null;

  private stream: EventStream | null = null;
  private chain: Promise<unknown> = Promise.resolve();

  private constructor(
    readonly api: SessionApi,
    readonly relay: RelayApi,
    readonly model: PlayerModel,
    readonly sessionId: string,
  ) {}

  static async connect(config: ConnectConfig): Promise<PlayerController> {
    const api = new SessionApi(config.serviceBase);
    const relay = new RelayApi(config.relayBase, config.deviceId ?? "player-ui");

    let sessionId = config.sessionId;
    if (!sessionId) {
      if (!config.documentId) throw new Error("connect needs a documentId or a sessionId");
      const descriptor = await api.createSession(config.documentId, {
        trigger_mode: config.triggerMode,
      });
      sessionId = descriptor.session_id;
    }

    const doc = await api.sessionDocument(sessionId);
    const controller = new PlayerController(api, relay, new PlayerModel(doc), sessionId);
    await controller.openEventStream();
    return controller;
  }

  /** Resolves once the snapshot frame has been applied. */
  private openEventStream(): Promise<void> {
    return new Promise((resolve, reject) => {
      let settled = false;
      this.stream = openStream(this.api.eventsUrl(this.sessionId), {
        onSnapshot: (snapshot) => {
          this.model.applySnapshot(snapshot);
          if (!settled) {
            settled = true;
            resolve();
          }
        },
        onEntry: (entry) => this.model.applyEntry(entry),
        onDown: (reason) => {
          this.model.setDisconnected(reason);
          if (!settled) {
            settled = true;
            reject(new Error(reason));
          }
        },
      });
    });
  }

  /** Drop and reopen the stream; the fresh snapshot resynchronizes state. */
  async reconnect(): Promise<void> {
    this.stream?.close();
    await this.openEventStream();
  }

  private enqueue<T>(task: () => Promise<T>): Promise<T> {
    const next = this.chain.then(task);
    this.chain = next.catch(() => undefined);
    return next;
  }

  /** Settles once every command issued so far has finished or failed. */
  idle(): Promise<void> {
    return this.chain.then(
      () => undefined,
      () => undefined,
    );
  }

  /**
   * Issue one command. The response echo feeds the same entry pipeline as
   * the stream; on failure the step display is left alone and the notice
   * offers a retry.
   */
  command(variant: CommandVariant): Promise<void> {
    return this.enqueue(async () => {
      try {
        const res = await this.api.command(this.sessionId, variant);
        if (res.overview) this.overviewPanel = res.overview;
        this.model.applyEntry(res.echo);
      } catch (err) {
        this.model.setNotice({
          text: `${variant} failed: ${err instanceof Error ? err.message : String(err)}`,
          retry: () => void this.command(variant),
        });
        throw err;
      }
    });
  }

  /**
   * Simulate showing a block: arm first when the session expects the spoken
   * cue and the last streamed state is unarmed, then report the sighting to
   * the relay stamped with the moment of the show. The jump itself arrives
   * back through the event stream; nothing moves locally.
   */
  showBlock(tagId: string): Promise<void> {
    return this.enqueue(async () => {
      try {
        const view = this.model.view;
        if (view.descriptor?.trigger_mode === "voice_armed" && !view.armed) {
          const res = await this.api.command(this.sessionId, "this_one");
          this.model.applyEntry(res.echo);
        }
        await this.relay.submitDetection(tagId, Date.now());
      } catch (err) {
        this.model.setNotice({
          text: `show ${tagId} failed: ${err instanceof Error ? err.message : String(err)}`,
          retry: () => void this.showBlock(tagId),
        });
        throw err;
      }
    });
  }

  close(): void {
    this.stream?.close();
  }
}
