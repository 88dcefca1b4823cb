"""Scenario config compiler.

A scenario is one YAML document with a ``dialogue`` section (the FSM graph),
a ``world`` section (robots, durations, emergency), instruction texts and
media declarations. Loading is deterministic and validates every structural
invariant; errors carry the offending path in the document.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ParseError, ValidationError
from .fsm import (
    REQUIREMENT_KINDS,
    SELF_TARGET,
    ActionKind,
    ActionOption,
    DAType,
    DialogueGraph,
    DialogueState,
    LockAwaits,
    LockCondition,
    Requirement,
    WorldCommand,
    template_slot_names,
)
from .world import Capability, MOVE_ACTION, Robot, RobotKind, WorldConfig

# Slot names the orchestrator can always fill from the live session.
CONTEXT_SLOTS = ("robot", "location", "time_left", "eta_s", "emergency_detail")

# Wizard-chosen slots and where their choice lists come from.
CHOICE_SLOTS = {"robot": "idle_robots", "location": "locations"}


@dataclass(frozen=True)
class Instructions:
    text: str
    video_url: str = ""


@dataclass(frozen=True)
class Scenario:
    name: str
    graph: DialogueGraph
    world: WorldConfig
    instructions: Mapping[str, Instructions]
    source_hash: str
    warnings: tuple[str, ...] = ()
    baseline: Mapping[str, Any] = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "hash": self.source_hash,
            "states": len(self.graph.states),
            "verbal_acts": self.graph.verbal_act_count(),
            "robots": [r.id for r in self.world.robots],
            "robot_details": [
                {
                    "id": r.id,
                    "kind": r.kind.value,
                    "capabilities": sorted(c.value for c in r.capabilities),
                }
                for r in self.world.robots
            ],
            "locations": list(self.world.locations),
            "emergency_location": self.world.emergency_location,
            "time_limit_s": self.world.time_limit_s,
        }


def load_scenario(text: str, strict: bool = False) -> Scenario:
    """Compile a scenario document. Deterministic for identical input."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"scenario is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a mapping")

    warnings: list[str] = []
    world = _parse_world(_require(doc, "world", dict, ""), warnings)
    graph = _parse_dialogue(_require(doc, "dialogue", dict, ""), world, warnings, strict)

    instructions = {}
    for role, node in (doc.get("instructions") or {}).items():
        if isinstance(node, str):
            instructions[role] = Instructions(text=node)
        else:
            instructions[role] = Instructions(
                text=str(node.get("text", "")), video_url=str(node.get("video_url", ""))
            )

    if strict and warnings:
        raise ValidationError("; ".join(warnings), path="(strict mode)")

    return Scenario(
        name=str(doc.get("name", "unnamed-scenario")),
        graph=graph,
        world=world,
        instructions=instructions,
        source_hash="sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:16],
        warnings=tuple(warnings),
        baseline=doc.get("analysis_baseline", {}) or {},
    )


def load_scenario_file(path: str | Path, strict: bool = False) -> Scenario:
    return load_scenario(Path(path).read_text(encoding="utf-8"), strict=strict)


# --------------------------------------------------------------------------
# dialogue section


def _parse_dialogue(
    node: dict, world: WorldConfig, warnings: list[str], strict: bool
) -> DialogueGraph:
    path = "dialogue"
    initial = _require(node, "initial_state", str, path)
    slot_defaults = {str(k): str(v) for k, v in (node.get("slot_defaults") or {}).items()}

    seen_ids: dict[str, str] = {}
    global_options = tuple(
        _parse_option(opt, f"{path}.global_options[{i}]", seen_ids, is_global=True)
        for i, opt in enumerate(node.get("global_options") or [])
    )

    states_node = _require(node, "states", dict, path)
    states: dict[str, DialogueState] = {}
    for sid, snode in states_node.items():
        spath = f"{path}.states.{sid}"
        if not isinstance(snode, dict):
            raise ValidationError("state must be a mapping", spath)
        options = tuple(
            _parse_option(opt, f"{spath}.options[{i}]", seen_ids)
            for i, opt in enumerate(snode.get("options") or [])
        )
        lock = None
        if "lock" in snode and snode["lock"] is not None:
            lnode = snode["lock"]
            try:
                awaits = LockAwaits(str(lnode.get("awaits", "")))
            except ValueError:
                raise ValidationError(
                    f"lock.awaits must be one of {[v.value for v in LockAwaits]}",
                    f"{spath}.lock.awaits",
                )
            lock = LockCondition(awaits=awaits, description=str(lnode.get("description", "")))
        hint_weights = {
            str(k): float(v) for k, v in (snode.get("hint_weights") or {}).items()
        }
        states[str(sid)] = DialogueState(
            id=str(sid), options=options, lock=lock, hint_weights=hint_weights
        )

    graph = DialogueGraph(
        states=states,
        initial_state=initial,
        global_options=global_options,
        slot_defaults=slot_defaults,
    )
    _validate_graph(graph, world, warnings)
    return graph


def _parse_option(
    node: Any, path: str, seen_ids: dict[str, str], is_global: bool = False
) -> ActionOption:
    if not isinstance(node, dict):
        raise ValidationError("option must be a mapping", path)
    oid = _require(node, "id", str, path)
    if oid in seen_ids:
        raise ValidationError(
            f"duplicate dialogue act id '{oid}' (first defined at {seen_ids[oid]})", path
        )
    seen_ids[oid] = path

    try:
        kind = ActionKind(str(node.get("kind", "verbal")))
    except ValueError:
        raise ValidationError("kind must be 'verbal' or 'nonverbal'", f"{path}.kind")
    try:
        da_type = DAType(str(_require(node, "da_type", str, path)))
    except ValueError:
        raise ValidationError(
            f"da_type must be one of {[v.value for v in DAType]}", f"{path}.da_type"
        )

    templates = tuple(str(t) for t in (node.get("templates") or []))
    if kind is ActionKind.VERBAL and not templates:
        raise ValidationError("verbal option needs at least one template", f"{path}.templates")

    target = str(node.get("target", SELF_TARGET))
    side_effects = tuple(
        _parse_command(c, f"{path}.side_effects[{i}]")
        for i, c in enumerate(node.get("side_effects") or [])
    )
    requires = tuple(
        _parse_requirement(r, f"{path}.requires[{i}]")
        for i, r in enumerate(node.get("requires") or [])
    )
    required_slots = tuple(str(s) for s in (node.get("slots") or []))
    if is_global and target != SELF_TARGET:
        raise ValidationError("global shortcuts must be self-loops", f"{path}.target")

    return ActionOption(
        id=oid,
        kind=kind,
        da_type=da_type,
        templates=templates,
        target_state=target,
        side_effects=side_effects,
        required_slots=required_slots,
        requires=requires,
        while_locked=bool(node.get("while_locked", False)),
    )


def _parse_command(node: Any, path: str) -> WorldCommand:
    if not isinstance(node, dict):
        raise ValidationError("side effect must be a mapping", path)
    kind = _require(node, "kind", str, path)
    if kind == "move_robot":
        return WorldCommand(kind="move_robot")
    if kind == "start_work":
        action = _require(node, "action", str, path)
        try:
            Capability(action)
        except ValueError:
            raise ValidationError(
                f"unknown work action '{action}'", f"{path}.action"
            )
        return WorldCommand(kind="start_work", action=action)
    if kind == "site_event":
        return WorldCommand(kind="site_event", event=_require(node, "event", str, path))
    raise ValidationError(f"unknown side effect kind '{kind}'", f"{path}.kind")


def _parse_requirement(node: Any, path: str) -> Requirement:
    if isinstance(node, str):
        kind, arg = node, ""
    elif isinstance(node, dict) and len(node) == 1:
        kind, arg = next(iter(node.items()))
    else:
        raise ValidationError("requirement must be a string or a one-key mapping", path)
    if kind not in REQUIREMENT_KINDS:
        raise ValidationError(
            f"unknown requirement '{kind}' (known: {', '.join(REQUIREMENT_KINDS)})", path
        )
    return Requirement(kind=str(kind), arg=str(arg))


def _validate_graph(graph: DialogueGraph, world: WorldConfig, warnings: list[str]) -> None:
    if graph.initial_state not in graph.states:
        raise ValidationError(
            f"initial_state '{graph.initial_state}' is not a defined state",
            "dialogue.initial_state",
        )

    robot_capabilities = {c.value for r in world.robots for c in r.capabilities}
    resolvable = set(CONTEXT_SLOTS) | set(graph.slot_defaults)

    for sid, state in graph.states.items():
        spath = f"dialogue.states.{sid}"
        if not state.options:
            warnings.append(f"{spath}: dead-end state has no options of its own")
        if state.lock is not None and not any(o.while_locked for o in state.options):
            raise ValidationError(
                "locked state needs at least one option usable while locked",
                f"{spath}.lock",
            )
        unknown = set(state.hint_weights) - {o.id for o in state.options}
        if unknown:
            raise ValidationError(
                f"hint_weights name unknown options: {sorted(unknown)}",
                f"{spath}.hint_weights",
            )
        if state.hint_weights:
            if any(w < 0 for w in state.hint_weights.values()):
                raise ValidationError("hint weights must be non-negative", f"{spath}.hint_weights")
            if sum(state.hint_weights.values()) <= 0:
                raise ValidationError("hint weights must sum > 0", f"{spath}.hint_weights")

        for i, opt in enumerate(state.options):
            _validate_option(opt, f"{spath}.options[{i}]", graph, resolvable, robot_capabilities)

    for i, opt in enumerate(graph.global_options):
        _validate_option(
            opt, f"dialogue.global_options[{i}]", graph, resolvable, robot_capabilities
        )

    unreachable = set(graph.states) - _reachable_states(graph)
    for sid in sorted(unreachable):
        warnings.append(f"dialogue.states.{sid}: state is unreachable from the initial state")


def _validate_option(
    opt: ActionOption,
    path: str,
    graph: DialogueGraph,
    resolvable: set[str],
    robot_capabilities: set[str],
) -> None:
    if opt.target_state != SELF_TARGET and opt.target_state not in graph.states:
        raise ValidationError(
            f"option targets missing state '{opt.target_state}'", f"{path}.target"
        )
    for t in opt.templates:
        holes = template_slot_names(t) - set(opt.required_slots) - resolvable
        if holes:
            raise ValidationError(
                f"template references unresolvable slots {sorted(holes)}",
                f"{path}.templates",
            )
    for name in opt.required_slots:
        if name not in CHOICE_SLOTS:
            raise ValidationError(
                f"required slot '{name}' has no choice source (known: {sorted(CHOICE_SLOTS)})",
                f"{path}.slots",
            )
    dispatches = any(c.kind in ("move_robot", "start_work") for c in opt.side_effects)
    if dispatches and not any(r.kind == "no_active_task" for r in opt.requires):
        raise ValidationError(
            "robot-dispatching option must require no_active_task "
            "(single-active-robot rule)",
            f"{path}.requires",
        )
    for cmd in opt.side_effects:
        if cmd.kind == "start_work" and cmd.action not in robot_capabilities:
            raise ValidationError(
                f"no robot in this scenario can perform '{cmd.action}'",
                f"{path}.side_effects",
            )


def _reachable_states(graph: DialogueGraph) -> set[str]:
    seen = {graph.initial_state}
    frontier = [graph.initial_state]
    while frontier:
        sid = frontier.pop()
        for opt in graph.states[sid].options:
            tgt = opt.target_state
            if tgt != SELF_TARGET and tgt not in seen:
                seen.add(tgt)
                frontier.append(tgt)
    return seen


# --------------------------------------------------------------------------
# world section


def _parse_world(node: dict, warnings: list[str]) -> WorldConfig:
    path = "world"
    locations = tuple(str(x) for x in _require(node, "locations", list, path))
    if not locations:
        raise ValidationError("at least one location required", f"{path}.locations")

    emergency = _require(node, "emergency", dict, path)
    emergency_location = _require(emergency, "location", str, f"{path}.emergency")
    if emergency_location not in locations:
        raise ValidationError(
            f"emergency location '{emergency_location}' not in locations",
            f"{path}.emergency.location",
        )

    robots= []
    for i, rnode in enumerate(_require(node, "robots", list, path)):
        rpath = f"{path}.robots[{i}]"
        if not isinstance(rnode, dict):
            raise ValidationError("robot must be a mapping", rpath)
        try:
            kind = RobotKind(str(_require(rnode, "kind", str, rpath)))
        except ValueError:
            raise ValidationError(
                f"kind must be one of {[v.value for v in RobotKind]}", f"{rpath}.kind"
            )
        caps = set()
        for c in rnode.get("capabilities") or []:
            try:
                caps.add(Capability(str(c)))
            except ValueError:
                raise ValidationError(
                    f"unknown capability '{c}'", f"{rpath}.capabilities"
                )
        if not caps:
            raise ValidationError("robot needs at least one capability", f"{rpath}.capabilities")
        start_loc = str(rnode.get("location", locations[0]))
        if start_loc not in locations:
            raise ValidationError(f"unknown start location '{start_loc}'", f"{rpath}.location")
        robots.append(
            Robot(
                id=_require(rnode, "id", str, rpath),
                kind=kind,
                capabilities=frozenset(caps),
                location=start_loc,
            )
        )
    if not robots:
        raise ValidationError("scenario declares no robots", f"{path}.robots")
    if len({r.id for r in robots}) != len(robots):
        raise ValidationError("robot ids must be unique", f"{path}.robots")

    durations: dict[str, dict[RobotKind, float]] = {}
    for action, per_kind in (_require(node, "durations", dict, path)).items():
        apath = f"{path}.durations.{action}"
        if action != MOVE_ACTION:
            try:
                Capability(str(action))
            except ValueError:
                raise ValidationError(f"unknown action '{action}'", apath)
        if not isinstance(per_kind, dict):
            raise ValidationError("durations entry must map robot kind to seconds", apath)
        durations[str(action)] = {}
        for k, v in per_kind.items():
            try:
                rk = RobotKind(str(k))
            except ValueError:
                raise ValidationError(f"unknown robot kind '{k}'", apath)
            secs = float(v)
            if secs <= 0:
                raise ValidationError("durations must be positive", f"{apath}.{k}")
            durations[str(action)][rk] = secs

    for robot in robots:
        needed = [MOVE_ACTION] + [c.value for c in robot.capabilities]
        for action in needed:
            if robot.kind not in durations.get(action, {}):
                raise ValidationError(
                    f"no duration for ({robot.kind.value}, {action}) needed by robot "
                    f"'{robot.id}'",
                    f"{path}.durations",
                )

    media = {str(k): str(v) for k, v in (node.get("media") or {}).items()}
    narrations = {str(k): str(v) for k, v in (node.get("narrations") or {}).items()}

    return WorldConfig(
        robots=tuple(robots),
        locations=locations,
        emergency_location=emergency_location,
        emergency_detail=str(emergency.get("detail", emergency_location)),
        durations=durations,
        time_limit_s=float(node.get("time_limit_s", 360)),
        timer_warnings_s=tuple(float(x) for x in (node.get("timer_warnings_s") or [60])),
        media=media,
        narrations=narrations,
        allow_cancel=bool(node.get("allow_cancel", False)),
    )


def _require(node: dict, key: str, typ: type, path: str) -> Any:
    dotted = f"{path}.{key}" if path else key
    if key not in node or node[key] is None:
        raise ValidationError(f"missing required key '{key}'", dotted)
    value = node[key]
    if typ is str:
        if not isinstance(value, str) or not value:
            raise ValidationError("must be a non-empty string", dotted)
    elif not isinstance(value, typ):
        raise ValidationError(f"must be of type {typ.__name__}", dotted)
    return value
