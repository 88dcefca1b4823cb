// Recorded-trace tests: envelope sequences captured from real scripted
// sessions are folded through the client state and rendered; the operator
// view must never grow option or hint elements, and the wizard's buttons
// must mirror each action_options envelope exactly.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import type { Envelope, OptionsPayload } from "../src/protocol.js";
import { initialState, reduce, ViewState } from "../src/state.js";
import { byClass, findAll, VNode } from "../src/vdom.js";
import { renderOverlay, renderPanel, renderTimer, renderTranscript } from "../src/view.js";

const here = dirname(fileURLToPath(import.meta.url));

interface Trace {
  operator: Envelope[];
  wizard: Envelope[];
}

function loadTrace(name: string): Trace {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as Trace;
}

const TRACES = ["golden_traces.json", "random_traces.json"].map((name) => ({
  name,
  trace: loadTrace(name),
}));

function renderAll(state: ViewState): VNode {
  return {
    tag: "root",
    attrs: {},
    children: [
      renderTimer(state),
      renderTranscript(state),
      renderPanel(state),
      renderOverlay(state),
    ],
  };
}

const OPTION_CLASSES = ["option-button", "robot-button", "hint-button", "hint", "option-group"];

describe.each(TRACES)("option privacy over $name", ({ trace }) => {
  it("the operator view renders no option or hint element at any point", () => {
    // Server-side guarantee first: the recorded operator stream contains no
    // wizard-only envelope at all.
    const types = new Set(trace.operator.map((e) => e.type));
    expect(types.has("action_options")).toBe(false);
    expect(types.has("hint_highlight")).toBe(false);

    // UI-level: fold the full trace, rendering after every envelope.
    let state = initialState();
    for (const env of trace.operator) {
      state = reduce(state, env);
      const tree = renderAll(state);
      for (const cls of OPTION_CLASSES) {
        expect(byClass(tree, cls)).toEqual([]);
      }
    }
    expect(state.role).toBe("operator");
    expect(state.phase).toBe("ended");
  });

  it("the wizard's enabled buttons match every action_options envelope exactly", () => {
    let state = initialState();
    let optionPushes = 0;
    for (const env of trace.wizard) {
      state = reduce(state, env);
      if (env.type !== "action_options" || state.phase !== "playing") continue;
      optionPushes += 1;
      const payload = env.payload as unknown as OptionsPayload;
      const advertised = new Set(payload.options.map((o) => o.id));

      const tree = renderPanel(state);
      const enabled = new Set(
        findAll(tree, (n) => n.tag === "button" && Boolean(n.attrs["data-action"]) && !n.attrs["disabled"])
          .map((n) => String(n.attrs["data-action"])),
      );
      expect(enabled).toEqual(advertised);

      // Disabled-state fidelity: robot buttons render for every command seen
      // so far and are disabled exactly when the latest push omits them.
      const robotButtons = byClass(tree, "robot-button");
      expect(robotButtons.map((n) => String(n.attrs["data-action"])).sort()).toEqual(
        state.seenCommandIds,
      );
      for (const button of robotButtons) {
        const id = String(button.attrs["data-action"]);
        expect(Boolean(button.attrs["disabled"])).toBe(!advertised.has(id));
      }
    }
    expect(optionPushes).toBeGreaterThan(5);
    expect(state.phase).toBe("ended");
  });
});

describe("wizard rendering details (golden trace)", () => {
  const trace = loadTrace("golden_traces.json");

  it("timer text always equals the latest server payload", () => {
    let state = initialState();
    for (const env of trace.wizard) {
      state = reduce(state, env);
      if (env.type !== "timer" || state.phase !== "playing") continue;
      const text = collectText(renderTimer(state));
      expect(text).toBe(String(env.payload["remaining"]));
    }
  });

  it("milestone media render as images resolving the asset identifier", () => {
    let state = initialState();
    for (const env of trace.wizard) {
      state = reduce(state, env);
    }
    const tree = renderTranscript(state);
    const images = findAll(tree, (n) => n.tag === "img");
    expect(images.length).toBeGreaterThan(3); // arrivals, located, resolved, assessed
    for (const img of images) {
      expect(String(img.attrs["src"])).toMatch(/^assets\/.+\.gif$/);
    }
  });

  it("the session-end overlay shows the completion token and questionnaire", () => {
    let state = initialState();
    for (const env of trace.wizard) state = reduce(state, env);
    expect(state.phase).toBe("ended");
    const overlay = renderOverlay(state);
    const token = byClass(overlay, "token");
    expect(token).toHaveLength(1);
    expect(collectText(token[0]!)).toMatch(/^[A-Z0-9]{10}$/);
    expect(byClass(overlay, "questionnaire")).toHaveLength(1);
    expect(byClass(overlay, "rating")).toHaveLength(4); // Q1..Q4, 7-point
  });

  it("hint highlight marks exactly the suggested button", () => {
    let state = initialState();
    for (const env of trace.wizard) {
      state = reduce(state, env);
      if (state.phase !== "playing") continue;
      if (env.type === "hint_highlight") {
        const tree = renderPanel(state);
        const pulsing = byClass(tree, "hint");
        expect(pulsing.map((n) => n.attrs["data-action"])).toEqual([
          env.payload["action"],
        ]);
      }
    }
  });

  it("locked states surface the waiting banner", () => {
    let state = initialState();
    let sawLock = false;
    for (const env of trace.wizard) {
      state = reduce(state, env);
      if (env.type === "action_options" && state.optionsMeta?.locked && state.phase === "playing") {
        sawLock = true;
        expect(byClass(renderPanel(state), "lock-banner")).toHaveLength(1);
      }
    }
    expect(sawLock).toBe(true);
  });
});

function collectText(node: VNode): string {
  let out = "";
  for (const child of node.children) {
    out += typeof child === "string" ? child : collectText(child);
  }
  return out;
}
