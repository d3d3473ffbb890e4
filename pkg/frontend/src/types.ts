/** Wire shapes as the session service and relay emit them. */

export interface SessionDescriptor {
  session_id: string;
  title: string;
  trigger_mode: string;
  created_at: number;
  current_step: number;
  total_steps: number;
}

/** One committed log entry, identical over the event stream and in echoes. */
export interface EntryEvent {
  seq: number;
  at: number;
  command: string;
  tag: string | null;
  from_step: number;
  to_step: number;
  classification: string;
  note: string | null;
}

/** First frame of every event stream: full state plus the log high-water mark. */
export interface SessionSnapshot extends SessionDescriptor {
  return_anchor: number | null;
  armed: boolean;
  visited: number[];
  last_seq: number;
}

export interface OverviewJson {
  current_step: number;
  total_steps: number;
  subpart_path: string[];
  visited: number[];
}

export interface CommandResponse {
  descriptor: SessionDescriptor;
  echo: EntryEvent;
  overview?: OverviewJson;
}

export interface BlockSpec {
  tag_id: string;
  label: string;
  color: string;
  asymmetric: boolean;
}

export interface StepJson {
  index: number;
  kind: string;
  blocks_introduced: string[];
  subpart_id: string | null;
  caption: string;
  image_ref: string | null;
}

export interface SubPartJson {
  id: string;
  name: string;
  parent: string | null;
  step_range: [number, number];
}

export interface DocumentJson {
  title: string;
  format_version: number;
  tag_mode: string;
  catalog: BlockSpec[];
  steps: StepJson[];
  subparts: SubPartJson[];
}

export interface DetectionAck {
  seq?: number;
  deduplicated?: boolean;
}

/** Command variants accepted by POST .../command. */
export type CommandVariant = "next" | "previous" | "this_one" | "overview" | "going_back";

export const COMMANDS: readonly CommandVariant[] = [
  "next",
  "previous",
  "this_one",
  "overview",
  "going_back",
];

/** note cells are comma-joined tokens, e.g. "unknown_tag,relay_seq=3". */
export function noteHas(note: string | null, token: string): boolean {
  return note !== null && note.split(",").includes(token);
}
