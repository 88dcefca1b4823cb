// Browser entry: one WebSocket, envelope fold, region re-renders, input
// wiring. All game logic lives on the server; this file only ships events.

import { decodeServerEnvelope, encodeClientEnvelope } from "./protocol.js";
import { clearHint, initialState, reduce, ViewState } from "./state.js";
import { mount } from "./vdom.js";
import { renderOverlay, renderPanel, renderTimer, renderTranscript } from "./view.js";

const HEARTBEAT_MS = 10_000;
const HINT_PULSE_MS = 5_000;

function main(): void {
  const regions = {
    timer: document.getElementById("timer")!,
    chat: document.getElementById("chat")!,
    panel: document.getElementById("panel")!,
    overlay: document.getElementById("overlay")!,
  };
  const input = document.getElementById("message-input") as HTMLInputElement;
  const form = document.getElementById("message-form") as HTMLFormElement;

  let state: ViewState = initialState();
  let seq = 0;
  let hintTimer: number | undefined;

  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${scheme}://${location.host}/ws`);

  const send = (type: string, payload: Record<string, unknown> = {}) => {
    ws.send(encodeClientEnvelope(type, seq++, payload, state.session ?? undefined));
  };

  const apply = (next: ViewState) => {
    if (next === state) return;
    const prev = state;
    state = next;
    render(prev);
  };

  const render = (prev: ViewState) => {
    mount(regions.timer, renderTimer(state));
    if (state.transcript !== prev.transcript) {
      mount(regions.chat, renderTranscript(state));
      regions.chat.scrollTop = regions.chat.scrollHeight;
    }
    mount(regions.panel, renderPanel(state));
    mount(regions.overlay, renderOverlay(state));
    regions.overlay.classList.toggle(
      "hidden",
      state.phase === "playing",
    );
  };

  ws.onopen = () => {
    send("join", {});
    const beat = window.setInterval(() => {
      if (state.phase === "ended") {
        window.clearInterval(beat);
        return;
      }
      send("ping", {});
    }, HEARTBEAT_MS);
  };

  ws.onmessage = (msg: MessageEvent<string>) => {
    const env = decodeServerEnvelope(msg.data);
    apply(reduce(state, env));
    if (env.type === "hint_highlight") {
      if (hintTimer !== undefined) window.clearTimeout(hintTimer);
      hintTimer = window.setTimeout(() => apply(clearHint(state)), HINT_PULSE_MS);
    }
  };

  ws.onclose = () => {
    if (state.phase !== "ended") {
      regions.overlay.classList.remove("hidden");
      mount(regions.overlay, renderOverlay({ ...state, phase: "connecting" }));
    }
  };

  // Free-text entry: operators send 'chat', wizards send 'free_text'.
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    const text = input.value.trim();
    if (!text || state.phase !== "playing") return;
    send(state.role === "wizard" ? "free_text" : "chat", { text });
    input.value = "";
  });

  // Clicks inside the re-rendered regions are delegated.
  regions.overlay.addEventListener("click", (e) => {
    const target = e.target as HTMLElement;
    if (target.matches("button.ready-button")) {
      send("ready", {});
      target.setAttribute("disabled", "");
    }
  });

  regions.overlay.addEventListener("submit", async (e) => {
    const form = e.target as HTMLFormElement;
    if (!form.matches("form.questionnaire")) return;
    e.preventDefault();
    const data = new FormData(form);
    const body = {
      token: state.end?.token ?? "",
      q1: Number(data.get("q1")),
      q2: Number(data.get("q2")),
      q3: Number(data.get("q3")),
      q4: Number(data.get("q4")),
      free_text: String(data.get("free_text") ?? ""),
    };
    const resp = await fetch("/questionnaire", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    form.replaceChildren(
      document.createTextNode(
        resp.ok
          ? "Thank you! Your answers were recorded. Submit your token to the task page."
          : `Submission failed (${resp.status}). Already submitted?`,
      ),
    );
  });

  regions.panel.addEventListener("click", (e) => {
    const target = e.target as HTMLElement;
    const button = target.closest("button") as HTMLButtonElement | null;
    if (!button || button.disabled) return;
    if (button.dataset["role"] === "hint") {
      send("hint_request", {});
      return;
    }
    const action = button.dataset["action"];
    if (!action) return;
    const slots: Record<string, string> = {};
    for (const select of regions.panel.querySelectorAll<HTMLSelectElement>(
      `select[data-for="${CSS.escape(action)}"]`,
    )) {
      if (select.value) slots[select.dataset["slot"]!] = select.value;
    }
    send("wizard_action", { action, slots });
  });
}

main();
