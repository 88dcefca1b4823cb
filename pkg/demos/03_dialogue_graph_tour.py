#!/usr/bin/env python3
"""Explore the dialogue graph directly: states, gating, locks, hints and
template rendering, all without a server.

    python3 demos/03_dialogue_graph_tour.py
"""

import random

from wozlab import fsm
from wozlab.scenario import load_scenario_file
from wozlab.world import WorldState

scenario = load_scenario_file("scenarios/emergency.yaml")
graph = scenario.graph
world = WorldState(scenario.world, start=0.0)
rng = random.Random(1)

print(f"{len(graph.states)} states, {graph.verbal_act_count()} verbal acts, "
      f"{len(graph.global_options)} global shortcuts\n")

pos = fsm.initial_position(graph)
print(f"initial state: {pos.current_state}")
print("available:", [o.id for o in fsm.available_actions(graph, pos, world)])

# Greet, raise the alarm, ask for the PA go-ahead.
for act in ("intro_hello", "inform_alert_emergency", "request_pa_announcement"):
    result = fsm.apply_action(graph, pos, act, {}, rng, world, world.context_slots(0))
    pos = result.new_position
    print(f"\n> {act}")
    print(f"  says: {result.rendered_utterance!r}")
    print(f"  now in: {pos.current_state} (locked: {pos.lock_active})")

print("\nwhile locked, only the re-ask and the global shortcuts remain:")
print(" ", [o.id for o in fsm.available_actions(graph, pos, world)])

print("\nfree text never moves the FSM:")
result = fsm.record_free_text(pos, "give me a second")
print(f"  typed={result.event.typed}, still in {result.new_position.current_state}, "
      f"still locked={result.new_position.lock_active}")

pos = fsm.clear_lock(pos)  # the operator answered
print("\nafter the operator answers:")
print(" ", [o.id for o in fsm.available_actions(graph, pos, world)])

print("\nhints sample only currently-available state options:")
hints = {fsm.suggest_hint(graph, pos, world, random.Random(s)) for s in range(30)}
print(" ", sorted(hints))

# Dispatch a robot and watch the gating follow the world.
pos = fsm.apply_action(graph, pos, "action_performed", {}, rng, world,
                       world.context_slots(0)).new_position
pos = fsm.apply_action(graph, pos, "request_robot_type", {}, rng, world,
                       world.context_slots(0)).new_position
pos = fsm.clear_lock(pos)
result = fsm.apply_action(
    graph, pos, "inform_moving", {"robot": "quad copter 1"}, rng, world,
    world.context_slots(0),
)
pos = result.new_position
for cmd in result.world_commands:
    world.execute_command(cmd, result.slots_used, now=0.0)
print(f"\n> inform_moving: {result.rendered_utterance!r}")
print("  robot busy; dispatch options are gone:",
      [o.id for o in fsm.available_actions(graph, pos, world)])

world.tick(9.0)  # the UAV arrives
print("  after arrival:",
      [o.id for o in fsm.available_actions(graph, pos, world)])
