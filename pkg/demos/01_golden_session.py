#!/usr/bin/env python3
"""Walk one scripted session through the full platform and print the
transcript: pairing, role-specific instructions, the FSM-gated game on a
virtual clock, milestones with media references, and the completion tokens.

Run from the repository root:

    python3 demos/01_golden_session.py
"""

import tempfile

from wozlab.harness import GoldenOperator, GoldenWizard, run_session
from wozlab.scenario import load_scenario_file
from wozlab.world import format_mmss

scenario = load_scenario_file("scenarios/emergency.yaml")
print(f"scenario: {scenario.name} ({scenario.graph.verbal_act_count()} verbal acts, "
      f"{len(scenario.world.robots)} robots, {scenario.world.time_limit_s:.0f}s limit)\n")

with tempfile.TemporaryDirectory() as tmp:
    result = run_session(
        scenario, GoldenOperator(), GoldenWizard(), log_dir=tmp, seed=0
    )

    t0 = result.log["started_at"]
    for event in result.log["events"]:
        t = format_mmss(event["ts"] - t0 - 30)  # game starts after instructions
        if event["kind"] in ("chat", "wizard_option", "wizard_free_text") and event.get("text"):
            who = "OPERATOR " if event["actor"] == "operator" else "ASSISTANT"
            act = f" [{event['dialogue_act']}]" if event.get("dialogue_act") else ""
            print(f"{t}  {who}{act}: {event['text']}")
        elif event["kind"] == "milestone":
            media = f" ({event['media_ref']})" if event.get("media_ref") else ""
            print(f"{t}  *** {event['narration']}{media}")

    outcome = result.outcome
    print(f"\noutcome: {outcome['reason']}, resolved={outcome['resolved']}")
    print(f"progress: {outcome['progress']}")
    print(f"pay per participant: ${outcome['reward_cents'] / 100:.2f}")
    print(f"completion token (both participants): {outcome['token']}")
    print(f"log file: {result.log_path.name}")
