// Client view state: a pure fold over server envelopes. The client never
// computes option availability itself; it mirrors the latest push.

import type {
  Envelope,
  OptionSpec,
  OptionsPayload,
  Role,
  ScenarioMeta,
  SessionEndPayload,
} from "./protocol.js";

export type Phase = "connecting" | "lobby" | "instructions" | "playing" | "ended";

export interface ChatItem {
  kind: "chat";
  actor: string;
  text: string;
  typed: boolean;
  dialogue_act?: string;
}

export interface EventItem {
  kind: "event";
  event: string;
  narration: string;
  media_ref: string | null;
}

export type TranscriptItem = ChatItem | EventItem;

export interface ViewState {
  phase: Phase;
  role: Role | null;
  session: string | null;
  participant: string | null;
  scenario: ScenarioMeta | null;
  instructions: { text: string; video_url: string; min_read_s: number } | null;
  transcript: TranscriptItem[];
  // Wizard only: the latest advertised option set and every non-verbal
  // command id seen so far (buttons render disabled once absent).
  options: OptionSpec[];
  optionsMeta: { state: string; locked: boolean; pending: string | null } | null;
  seenCommandIds: string[];
  hint: string | null;
  timer: { remaining_s: number; remaining: string } | null;
  end: SessionEndPayload | null;
  lastNotice: { level: string; text: string } | null;
}

export function initialState(): ViewState {
  return {
    phase: "connecting",
    role: null,
    session: null,
    participant: null,
    scenario: null,
    instructions: null,
    transcript: [],
    options: [],
    optionsMeta: null,
    seenCommandIds: [],
    hint: null,
    timer: null,
    end: null,
    lastNotice: null,
  };
}

/** Fold one server envelope into the view state. Returns the same object
 * reference when nothing observable changed (callers skip re-rendering). */
export function reduce(state: ViewState, env: Envelope): ViewState {
  const p = env.payload as Record<string, unknown>;
  switch (env.type) {
    case "role_assigned":
      return {
        ...state,
        role: p["role"] as Role,
        session: p["session"] as string,
        participant: (p["participant"] ?? null) as string | null,
        scenario: (p["scenario"] ?? state.scenario) as ScenarioMeta | null,
        phase: state.phase === "connecting" || state.phase === "lobby" ? "instructions" : state.phase,
      };
    case "instructions":
      return {
        ...state,
        phase: "instructions",
        instructions: {
          text: (p["text"] as string) ?? "",
          video_url: (p["video_url"] as string) ?? "",
          min_read_s: (p["min_read_s"] as number) ?? 0,
        },
      };
    case "chat":
      return {
        ...state,
        transcript: [
          ...state.transcript,
          {
            kind: "chat",
            actor: p["actor"] as string,
            text: p["text"] as string,
            typed: Boolean(p["typed"]),
            dialogue_act: p["dialogue_act"] as string | undefined,
          },
        ],
      };
    case "world_event":
      return {
        ...state,
        transcript: [
          ...state.transcript,
          {
            kind: "event",
            event: p["event"] as string,
            narration: p["narration"] as string,
            media_ref: (p["media_ref"] ?? null) as string | null,
          },
        ],
      };
    case "action_options": {
      const payload = env.payload as unknown as OptionsPayload;
      const seen = new Set(state.seenCommandIds);
      for (const opt of payload.options) {
        if (opt.kind === "nonverbal") seen.add(opt.id);
      }
      return {
        ...state,
        options: payload.options,
        optionsMeta: {
          state: payload.state,
          locked: payload.locked,
          pending: payload.pending ?? null,
        },
        seenCommandIds: [...seen].sort(),
        hint: null, // a fresh option set supersedes the highlight
      };
    }
    case "hint_highlight":
      return { ...state, hint: p["action"] as string };
    case "timer": {
      const remaining_s = p["remaining_s"] as number;
      const remaining = (p["remaining"] as string) ?? formatMmSs(remaining_s);
      const phase = state.phase === "ended" ? state.phase : "playing";
      if (
        state.timer &&
        state.timer.remaining_s === remaining_s &&
        state.phase === phase
      ) {
        return state;
      }
      return { ...state, phase, timer: { remaining_s, remaining } };
    }
    case "session_end":
      return {
        ...state,
        phase: "ended",
        options: [],
        hint: null,
        end: env.payload as unknown as SessionEndPayload,
      };
    case "notice": {
      const level = p["level"] as string;
      const text = p["text"] as string;
      if (level === "info" && state.phase === "connecting") {
        return { ...state, phase: "lobby", lastNotice: { level, text } };
      }
      return { ...state, lastNotice: { level, text } };
    }
    case "pong":
      return state;
    default:
      return state;
  }
}

export function clearHint(state: ViewState): ViewState {
  return state.hint === null ? state : { ...state, hint: null };
}

export function formatMmSs(totalSeconds: number): string {
  const s = Math.max(0, Math.floor(totalSeconds));
  const mm = Math.floor(s / 60);
  const ss = (s % 60).toString().padStart(2, "0");
  return `${mm}:${ss}`;
}
