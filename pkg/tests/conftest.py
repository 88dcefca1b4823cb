import pytest

from wozlab.harness import GoldenPolicy, ScriptStep
from wozlab.scenario import Scenario, load_scenario_file

SCENARIO_PATH = "scenarios/emergency.yaml"


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    return load_scenario_file(SCENARIO_PATH)


# The published example transcript, replayed exactly as far as it is shown:
# 15 assistant utterances and 7 operator messages, ending with the second
# robot dispatch. Timed so every gated act is available when scripted.
TABLE5_WIZARD_STEPS = [
    ScriptStep(2, "action", "intro_hello"),
    ScriptStep(5, "action", "request_attention"),
    ScriptStep(10, "action", "inform_alert_emergency"),
    ScriptStep(14, "action", "request_pa_announcement"),
    ScriptStep(20, "action", "action_performed"),
    ScriptStep(23, "action", "inform_activate_emergency_shutdown"),
    ScriptStep(28, "action", "request_robot_type"),
    ScriptStep(34, "action", "inform_moving", {"robot": "quad copter 1"}),
    ScriptStep(36, "action", "inform_robot_eta"),
    ScriptStep(38, "action", "inform_time_left"),
    ScriptStep(45, "action", "inform_arrival"),
    ScriptStep(48, "action", "inform_inspection"),
    ScriptStep(62, "action", "inform_emergency_status"),
    ScriptStep(65, "action", "request_robot_emergency"),
    ScriptStep(72, "action", "inform_moving", {"robot": "quad copter 2"}),
]

TABLE5_OPERATOR_STEPS = [
    ScriptStep(7, "chat", text="Hi Fred, I am here"),
    ScriptStep(12, "chat", text="Ok what do you suggest we do first"),
    ScriptStep(17, "chat", text="Yes that sounds good"),
    ScriptStep(26, "chat", text="Ok"),
    ScriptStep(31, "chat", text="I would like to use the quad copter 1"),
    ScriptStep(46, "chat", text="Is Quad copter indicating what the problem is?"),
    ScriptStep(68, "chat", text="Should we extinguish the fire now using quad copter 2"),
]


def table5_policies():
    return GoldenPolicy(TABLE5_OPERATOR_STEPS), GoldenPolicy(TABLE5_WIZARD_STEPS)


@pytest.fixture()
def table5_run(scenario, tmp_path):
    from wozlab.harness import run_session

    op, wiz = table5_policies()
    return run_session(scenario, op, wiz, log_dir=tmp_path / "logs", seed=11)


def make_fuzzed_log(rng, session_id: str) -> dict:
    """A structurally valid random log document (chained FSM states,
    non-decreasing timestamps, metrics derived from the events)."""
    from wozlab.logstore import compute_metrics

    states = ["start", "intro", "alerted", "robot_choice", "working"]
    acts = ["intro_hello", "inform_moving", "ack_okay", "request_robot_type", "cmd_move"]
    types = ["interaction", "action", "update", "request"]
    ts = 0.0
    state = "start"
    events = []
    for _ in range(rng.randrange(0, 60)):
        ts += rng.choice([0.0, 0.5, 1.0, 4.0])
        kind = rng.choice(["chat", "wizard_option", "wizard_free_text", "milestone", "hint"])
        if kind == "chat":
            events.append({
                "ts": ts, "actor": "operator", "kind": "chat",
                "text": " ".join(rng.choice(["ok", "yes", "send it", "hm..."])
                                 for _ in range(rng.randrange(1, 6))),
                "typed": True,
            })
        elif kind == "wizard_option":
            nxt = rng.choice(states)
            events.append({
                "ts": ts, "actor": "wizard", "kind": "wizard_option",
                "dialogue_act": rng.choice(acts), "da_type": rng.choice(types),
                "typed": False,
                "text": None if rng.random() < 0.2 else f"utterance {rng.randrange(100)}",
                "fsm_state_before": state, "fsm_state_after": nxt,
            })
            state = nxt
        elif kind == "wizard_free_text":
            events.append({
                "ts": ts, "actor": "wizard", "kind": "wizard_free_text",
                "typed": True, "text": f"typed {rng.randrange(100)}",
                "fsm_state_before": state, "fsm_state_after": state,
            })
        elif kind == "milestone":
            events.append({
                "ts": ts, "actor": "system", "kind": "milestone",
                "event_id": f"ev{rng.randrange(10_000)}", "event_kind": "robot_arrived",
                "narration": "arrived.", "media_ref": None,
            })
        else:
            events.append({
                "ts": ts, "actor": "wizard", "kind": "hint",
                "hint_action": rng.choice(acts),
            })
    duration = min(ts, 360.0)
    resolved = rng.random() < 0.3
    outcome = {
        "session_id": session_id,
        "reason": "completed" if resolved else "evacuated",
        "duration_played_s": duration,
        "resolved": resolved,
        "progress": {"located": resolved, "resolved": resolved,
                     "assessed": False, "evacuated": not resolved},
        "disconnected": None,
        "reward_cents": 50,
        "token": "".join(rng.choice("ABCDEFGHJKLMNPQRSTUVWXYZ0123456789") for _ in range(10)),
    }
    return {
        "schema_version": 1,
        "session_id": session_id,
        "scenario": {"name": "fuzz", "hash": "sha256:0"},
        "participants": [{"id": "p-a", "role": "operator"}, {"id": "p-b", "role": "wizard"}],
        "started_at": 0.0,
        "events": events,
        "outcome": outcome,
        "metrics": compute_metrics(events, outcome),
    }
