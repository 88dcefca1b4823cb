// Pure view functions: ViewState in, virtual nodes out. The operator's
// panel contains no dialogue-option or hint elements under any message
// sequence; the wizard's panel mirrors exactly the latest advertised set.

import type { OptionSpec } from "./protocol.js";
import type { TranscriptItem, ViewState } from "./state.js";
import { h, VNode } from "./vdom.js";

const DA_GROUPS: ReadonlyArray<[string, string]> = [
  ["request", "Requests"],
  ["update", "Updates"],
  ["action", "Actions"],
  ["interaction", "Shortcuts"],
];

export function renderTimer(state: ViewState): VNode {
  // mm:ss straight from the latest server timer envelope; no local clock.
  const text = state.timer ? state.timer.remaining : "--:--";
  const urgent = state.timer !== null && state.timer.remaining_s <= 60;
  return h(
    "div",
    { class: urgent ? "timer urgent" : "timer" },
    state.phase === "ended" ? "game over" : text,
  );
}

export function renderTranscript(state: ViewState): VNode {
  return h(
    "div",
    { class: "transcript" },
    ...state.transcript.map(renderTranscriptItem),
  );
}

function renderTranscriptItem(item: TranscriptItem): VNode {
  if (item.kind === "chat") {
    const who = item.actor === "wizard" ? "Assistant" : "Operator";
    return h(
      "div",
      { class: `line ${item.actor}` },
      h("span", { class: "who" }, who),
      h("span", { class: "text" }, item.text),
    );
  }
  return renderMilestone(item);
}

export function renderMilestone(item: TranscriptItem & { kind: "event" }): VNode {
  // Milestones show their narration and, when declared, the GIF asset
  // fetched by identifier from the media route.
  return h(
    "div",
    { class: "line milestone" },
    h("span", { class: "narration" }, item.narration),
    item.media_ref
      ? h("img", { class: "milestone-media", src: item.media_ref, alt: item.event })
      : null,
  );
}

export function renderOperatorPanel(state: ViewState): VNode {
  const scenario = state.scenario;
  const locations = scenario?.locations ?? [];
  const robots = scenario?.robot_details ?? [];
  return h(
    "div",
    { class: "panel operator-panel" },
    h("h2", {}, "Facility map"),
    h(
      "div",
      { class: "facility-map" },
      ...locations.map((loc) =>
        h(
          "div",
          {
            class:
              loc === scenario?.emergency_location
                ? "map-area emergency"
                : "map-area",
          },
          loc,
        ),
      ),
    ),
    h("h2", {}, "Available robots"),
    h(
      "ul",
      { class: "robot-list" },
      ...robots.map((r) =>
        h(
          "li",
          { class: "robot-entry" },
          h("strong", {}, r.id),
          ` (${r.kind}): ${r.capabilities.join(", ").replaceAll("_", " ")}`,
        ),
      ),
    ),
    h("p", { class: "note" }, "Only the assistant can control the robots; tell it what you need."),
  );
}

export function renderWizardPanel(state: ViewState): VNode {
  const options = state.options;
  const verbal = options.filter((o) => o.kind === "verbal");
  const nonverbalAvailable = new Set(
    options.filter((o) => o.kind === "nonverbal").map((o) => o.id),
  );
  const groups: VNode[] = [];
  for (const [da, label] of DA_GROUPS) {
    const members = verbal.filter((o) => o.da_type === da);
    if (!members.length) continue;
    groups.push(
      h(
        "div",
        { class: "option-group" },
        h("h3", {}, label),
        ...members.map((o) => renderOptionButton(o, state.hint)),
      ),
    );
  }

  const lockBanner = state.optionsMeta?.locked
    ? h(
        "div",
        { class: "lock-banner" },
        state.optionsMeta.pending ?? "Waiting for the Operator...",
      )
    : null;

  return h(
    "div",
    { class: "panel wizard-panel" },
    lockBanner,
    h("h2", {}, "Responses"),
    ...groups,
    h("h2", {}, "Robot controls"),
    h(
      "div",
      { class: "robot-controls" },
      ...state.seenCommandIds.map((id) =>
        h(
          "button",
          {
            class: classNames("robot-button", state.hint === id && "hint"),
            "data-action": id,
            disabled: !nonverbalAvailable.has(id),
          },
          commandLabel(id),
        ),
      ),
    ),
    h(
      "button",
      { class: "hint-button", "data-role": "hint" },
      "Hint: what could I do now?",
    ),
  );
}

function renderOptionButton(option: OptionSpec, hint: string | null): VNode {
  const slotChoices = Object.entries(option.slots);
  return h(
    "div",
    { class: "option-row" },
    h(
      "button",
      {
        class: classNames("option-button", hint === option.id && "hint"),
        "data-action": option.id,
        title: option.id,
      },
      option.preview ?? option.id,
    ),
    ...slotChoices.map(([name, choices]) =>
      h(
        "select",
        { class: "slot-select", "data-slot": name, "data-for": option.id },
        h("option", { value: "" }, `choose ${name}`),
        ...choices.map((c) => h("option", { value: c }, c)),
      ),
    ),
  );
}

export function renderPanel(state: ViewState): VNode {
  if (state.role === "wizard" && state.phase === "playing") {
    return renderWizardPanel(state);
  }
  if (state.role === "operator") {
    return renderOperatorPanel(state);
  }
  return h("div", { class: "panel" });
}

export function renderOverlay(state: ViewState): VNode {
  switch (state.phase) {
    case "connecting":
      return h("div", { class: "overlay" }, h("p", {}, "Connecting..."));
    case "lobby":
      return h(
        "div",
        { class: "overlay" },
        h("h2", {}, "Waiting room"),
        h("p", {}, state.lastNotice?.text ?? "Waiting for a partner to join..."),
      );
    case "instructions":
      return renderInstructions(state);
    case "ended":
      return renderSessionEnd(state);
    default:
      return h("div", { class: "overlay hidden" });
  }
}

function renderInstructions(state: ViewState): VNode {
  const body = state.instructions;
  return h(
    "div",
    { class: "overlay instructions" },
    h("h2", {}, `Your role: ${state.role ?? "..."}`),
    h("pre", { class: "instructions-text" }, body?.text ?? "..."),
    body?.video_url
      ? h("video", { class: "instructions-video", src: body.video_url, controls: true })
      : null,
    h(
      "button",
      { class: "ready-button", "data-role": "ready" },
      "I have read the instructions — I'm ready",
    ),
  );
}

function renderSessionEnd(state: ViewState): VNode {
  const end = state.end;
  const reward = end?.reward_cents != null ? `$${(end.reward_cents / 100).toFixed(2)}` : "";
  return h(
    "div",
    { class: "overlay session-end" },
    h("h2", {}, end?.resolved ? "Emergency resolved!" : "Session over"),
    h("p", {}, `Outcome: ${end?.reason ?? "?"}${reward ? ` — pay ${reward}` : ""}`),
    h(
      "p",
      { class: "token-line" },
      "Your completion token: ",
      h("code", { class: "token" }, end?.token ?? ""),
    ),
    h(
      "form",
      { class: "questionnaire", "data-role": "questionnaire" },
      h("h3", {}, "Post-task questionnaire (1-7)"),
      ...questionRows(),
      h("textarea", { name: "free_text", placeholder: "Any feedback about the task or your partner?" }),
      h("button", { class: "submit-questionnaire", type: "submit" }, "Submit"),
    ),
  );
}

const QUESTIONS: ReadonlyArray<[string, string]> = [
  ["q1", "How helpful was your partner?"],
  ["q2", "Was it easy to get the information you needed?"],
  ["q3", "How difficult was the task?"],
  ["q4", "Did you know what you could say or do at each point?"],
];

function questionRows(): VNode[] {
  return QUESTIONS.map(([name, label]) =>
    h(
      "label",
      { class: "question" },
      label,
      h(
        "select",
        { name, class: "rating" },
        ...["1", "2", "3", "4", "5", "6", "7"].map((v) => h("option", { value: v }, v)),
      ),
    ),
  );
}

function commandLabel(id: string): string {
  return id.replace(/^cmd_/, "").replaceAll("_", " ");
}

function classNames(...parts: (string | false)[]): string {
  return parts.filter(Boolean).join(" ");
}
