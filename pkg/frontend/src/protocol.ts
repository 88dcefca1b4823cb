// Wire protocol types, mirroring docs/protocol.md. The client renders what
// the server pushes and never derives game state on its own.

export const PROTOCOL_VERSION = 1;

export type Role = "operator" | "wizard";

export interface Envelope {
  v: number;
  type: string;
  seq: number;
  ts: number;
  session?: string;
  payload: Record<string, unknown>;
}

export interface OptionSpec {
  id: string;
  kind: "verbal" | "nonverbal";
  da_type: "request" | "interaction" | "action" | "update";
  global: boolean;
  preview: string | null;
  slots: Record<string, string[]>;
}

export interface OptionsPayload {
  state: string;
  locked: boolean;
  pending: string | null;
  options: OptionSpec[];
}

export interface RobotDetail {
  id: string;
  kind: string;
  capabilities: string[];
}

export interface ScenarioMeta {
  name: string;
  robots: string[];
  robot_details?: RobotDetail[];
  locations?: string[];
  emergency_location?: string;
  time_limit_s: number;
}

export interface SessionEndPayload {
  reason: string;
  resolved?: boolean;
  token: string;
  reward_cents?: number;
  duration_s?: number;
  questionnaire_url?: string;
}

const KNOWN_TYPES = new Set([
  "role_assigned", "instructions", "chat", "action_options", "hint_highlight",
  "world_event", "timer", "session_end", "notice", "pong",
]);

export function decodeServerEnvelope(text: string): Envelope {
  const doc = JSON.parse(text) as Envelope;
  if (doc.v !== PROTOCOL_VERSION) {
    throw new Error(`unsupported protocol version ${doc.v}`);
  }
  if (!KNOWN_TYPES.has(doc.type)) {
    throw new Error(`unknown envelope type '${doc.type}'`);
  }
  return doc;
}

export function encodeClientEnvelope(
  type: string,
  seq: number,
  payload: Record<string, unknown>,
  session?: string,
): string {
  const doc: Record<string, unknown> = {
    v: PROTOCOL_VERSION,
    type,
    seq,
    ts: Date.now() / 1000,
  };
  if (session) doc["session"] = session;
  doc["payload"] = payload;
  return JSON.stringify(doc);
}
