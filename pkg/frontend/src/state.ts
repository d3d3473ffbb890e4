/**
 * Player view model.
 *
 * The model mirrors engine state and never navigates on its own: the
 * displayed step is only ever assigned from a snapshot's current_step or
 * a log entry's to_step, both produced server-side. Everything else here
 * is bookkeeping copied from the same entries (armed flag, return anchor,
 * visited set) plus pure lookups into the immutable document.
 *
 * Entries are applied strictly in seq order. Echoes from command responses
 * and the event stream race each other, so arrivals are buffered and a
 * duplicate seq is dropped; state can therefore never double-apply or skip
 * an entry no matter which copy lands first.
 */

import type {
  BlockSpec,
  DocumentJson,
  EntryEvent,
  SessionDescriptor,
  SessionSnapshot,
  StepJson,
} from "./types.js";
import { noteHas } from "./types.js";

export interface StepDetail {
  index: number;
  kind: string;
  caption: string;
  imageRef: string | null;
  blocks: BlockSpec[];
  subpartPath: string[];
}

export interface OverviewMirror {
  currentStep: number;
  totalSteps: number;
  visited: ReadonlySet<number>;
  subpartPath: string[];
}

export interface Notice {
  text: string;
  retry?: () => void;
}

export interface PlayerView {
  descriptor: SessionDescriptor | null;
  detail: StepDetail | null;
  overview: OverviewMirror | null;
  palette: BlockSpec[];
  armed: boolean;
  returnAnchor: number | null;
  lastEvent: EntryEvent | null;
  lastSeq: number;
  connected: boolean;
  notice: Notice | null;
}

export type Listener = () => void;

export class PlayerModel {
  private readonly byTag = new Map<string, BlockSpec>();
  private readonly byIndex = new Map<number, StepJson>();
  private readonly listeners = new Set<Listener>();
  private readonly pending = new Map<number, EntryEvent>();

  private descriptor: SessionDescriptor | null = null;
  private lastSeq = 0;
  private armed = false;
  private returnAnchor: number | null = null;
  private visited = new Set<number>();
  private lastEvent: EntryEvent | null = null;
  private connected = false;
  private notice: Notice | null = null;

  constructor(readonly doc: DocumentJson) {
    for (const spec of doc.catalog) this.byTag.set(spec.tag_id, spec);
    for (const step of doc.steps) this.byIndex.set(step.index, step);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  get view(): PlayerView {
    return {
      descriptor: this.descriptor,
      detail: this.descriptor ? this.stepDetail(this.descriptor.current_step) : null,
      overview: this.descriptor
        ? {
            currentStep: this.descriptor.current_step,
            totalSteps: this.descriptor.total_steps,
            visited: this.visited,
            subpartPath: this.subpartPath(this.descriptor.current_step),
          }
        : null,
      palette: this.doc.catalog,
      armed: this.armed,
      returnAnchor: this.returnAnchor,
      lastEvent: this.lastEvent,
      lastSeq: this.lastSeq,
      connected: this.connected,
      notice: this.notice,
    };
  }

  /** Full resync: a fresh stream subscription replaces all mirrored state. */
  applySnapshot(snapshot: SessionSnapshot): void {
    this.descriptor = {
      session_id: snapshot.session_id,
      title: snapshot.title,
      trigger_mode: snapshot.trigger_mode,
      created_at: snapshot.created_at,
      current_step: snapshot.current_step,
      total_steps: snapshot.total_steps,
    };
    this.lastSeq = snapshot.last_seq;
    this.armed = snapshot.armed;
    this.returnAnchor = snapshot.return_anchor;
    this.visited = new Set(snapshot.visited);
    this.connected = true;
    for (const seq of [...this.pending.keys()]) {
      if (seq <= snapshot.last_seq) this.pending.delete(seq);
    }
    this.drainPending();
    this.emit();
  }

  /**
   * Buffer one entry and apply everything now contiguous. Duplicates are
   * dropped by seq, so feeding both the response echo and the streamed copy
   * of the same entry is safe. Listeners fire once per applied entry.
   */
  applyEntry(entry: EntryEvent): void {
    if (entry.seq <= this.lastSeq || this.pending.has(entry.seq)) return;
    this.pending.set(entry.seq, entry);
    this.drainPending();
  }

  private drainPending(): void {
    for (;;) {
      const next = this.pending.get(this.lastSeq + 1);
      if (next === undefined) break;
      this.pending.delete(next.seq);
      this.applyInOrder(next);
      this.emit();
    }
  }

  private applyInOrder(entry: EntryEvent): void {
    this.lastSeq = entry.seq;
    this.lastEvent = entry;
    this.visited.add(entry.to_step);
    if (this.descriptor) {
      this.descriptor = { ...this.descriptor, current_step: entry.to_step };
    }

    const wasArmed = this.armed;
    let notice: Notice | null = null;

    switch (entry.command) {
      case "this_one":
        this.armed = true;
        break;
      case "tag_detected":
        if (entry.classification === "nonlinear") {
          this.armed = false;
          this.returnAnchor = entry.from_step;
          if (noteHas(entry.note, "ambiguous_resolved")) {
            notice = { text: `${entry.tag ?? "tag"} appears more than once, nearest step is ${entry.to_step}` };
          }
        } else if (noteHas(entry.note, "unknown_tag")) {
          // window stays open so the user can show a readable block
          notice = { text: `unknown tag ${entry.tag ?? ""}, step unchanged`.trim() };
        } else if (noteHas(entry.note, "same_step")) {
          this.armed = false;
          notice = { text: `already at the step for ${entry.tag ?? "that block"}` };
        } else if (noteHas(entry.note, "unsolicited_detection")) {
          this.armed = false;
          notice = wasArmed
            ? { text: "jump window expired before the block was seen, show it again" }
            : { text: `ignored a sighting of ${entry.tag ?? "a block"}, not armed` };
        }
        break;
      case "going_back":
        if (entry.classification === "nonlinear") {
          this.returnAnchor = null;
        } else if (noteHas(entry.note, "no_anchor")) {
          notice = { text: "nothing to go back to" };
        }
        break;
      default:
        break;
    }
    this.notice = notice;
  }

  setDisconnected(reason: string): void {
    this.connected = false;
    this.notice = { text: reason };
    this.emit();
  }

  setNotice(notice: Notice | null): void {
    this.notice = notice;
    this.emit();
  }

  /** Block specs for a step, in introduction order; unknown tags skipped. */
  private blocksFor(step: StepJson): BlockSpec[] {
    const out: BlockSpec[] = [];
    for (const tag of step.blocks_introduced) {
      const spec = this.byTag.get(tag);
      if (spec) out.push(spec);
    }
    return out;
  }

  /** Names of the sub-parts containing a step, outermost first. */
  subpartPath(stepIndex: number): string[] {
    const chain = this.doc.subparts.filter(
      (sp) => sp.step_range[0] <= stepIndex && stepIndex <= sp.step_range[1],
    );
    chain.sort(
      (a, b) =>
        b.step_range[1] - b.step_range[0] - (a.step_range[1] - a.step_range[0]),
    );
    return chain.map((sp) => sp.name);
  }

  stepDetail(index: number): StepDetail | null {
    const step = this.byIndex.get(index);
    if (!step) return null;
    return {
      index: step.index,
      kind: step.kind,
      caption: step.caption,
      imageRef: step.image_ref,
      blocks: this.blocksFor(step),
      subpartPath: this.subpartPath(step.index),
    };
  }
}
