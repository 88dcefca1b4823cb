"""Finite-state dialogue graph and its execution.

The graph constrains which verbal and non-verbal actions the wizard can take
at each point of the interaction. It is immutable after load and shared
across sessions; each session owns one FsmPosition.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .errors import (
    ActionUnavailable,
    EmptyMessage,
    MissingSlot,
    NoActionsAvailable,
)

SELF_TARGET = "self"

_SLOT_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class ActionKind(str, Enum):
    VERBAL = "verbal"
    NONVERBAL = "nonverbal"


class DAType(str, Enum):
    REQUEST = "request"
    INTERACTION = "interaction"
    ACTION = "action"
    UPDATE = "update"


class LockAwaits(str, Enum):
    OPERATOR_MESSAGE = "operator_message"
    OPERATOR_CONFIRMATION = "operator_confirmation"


class WorldView(Protocol):
    """The slice of the world the gating predicates look at."""

    @property
    def has_active_task(self) -> bool: ...

    def emergency_reached(self, stage: str) -> bool: ...

    def emergency_stage_is(self, stage: str) -> bool: ...

    def context_robot_can(self, capability: str) -> bool: ...


@dataclass(frozen=True)
class Requirement:
    """A world predicate gating one option. ``kind`` is a closed vocabulary:

    no_active_task / task_active     -- robot activity
    emergency_is / emergency_at_least -- emergency lifecycle stage (``arg``)
    context_robot_can                -- session's current robot has capability
    """

    kind: str
    arg: str = ""

    def holds(self, world: WorldView) -> bool:
        if self.kind == "no_active_task":
            return not world.has_active_task
        if self.kind == "task_active":
            return world.has_active_task
        if self.kind == "emergency_is":
            return world.emergency_stage_is(self.arg)
        if self.kind == "emergency_at_least":
            return world.emergency_reached(self.arg)
        if self.kind == "context_robot_can":
            return world.context_robot_can(self.arg)
        raise ValueError(f"unknown requirement kind '{self.kind}'")


REQUIREMENT_KINDS = (
    "no_active_task",
    "task_active",
    "emergency_is",
    "emergency_at_least",
    "context_robot_can",
)


@dataclass(frozen=True)
class WorldCommand:
    """A side effect the world module executes after an accepted action.

    kind: move_robot | start_work | site_event
    """

    kind: str
    action: str = ""   # start_work: which capability to run
    event: str = ""    # site_event: event identifier (pa_announcement, ...)


@dataclass(frozen=True)
class ActionOption:
    id: str
    kind: ActionKind
    da_type: DAType
    templates: tuple[str, ...]
    target_state: str  # state id or SELF_TARGET
    side_effects: tuple[WorldCommand, ...] = ()
    required_slots: tuple[str, ...] = ()
    requires: tuple[Requirement, ...] = ()
    while_locked: bool = False  # usable while the state's lock is active

    @property
    def is_self_loop(self) -> bool:
        return self.target_state == SELF_TARGET


@dataclass(frozen=True)
class LockCondition:
    awaits: LockAwaits
    description: str = ""


@dataclass(frozen=True)
class DialogueState:
    id: str
    options: tuple[ActionOption, ...]
    lock: Optional[LockCondition] = None
    hint_weights: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DialogueGraph:
    states: Mapping[str, DialogueState]
    initial_state: str
    global_options: tuple[ActionOption, ...]
    slot_defaults: Mapping[str, str] = field(default_factory=dict)

    def option(self, action_id: str) -> ActionOption:
        opt = self.find_option(action_id)
        if opt is None:
            raise KeyError(action_id)
        return opt

    def find_option(self, action_id: str) -> Optional[ActionOption]:
        for opt in self.global_options:
            if opt.id == action_id:
                return opt
        for state in self.states.values():
            for opt in state.options:
                if opt.id == action_id:
                    return opt
        return None

    def all_options(self) -> Iterable[ActionOption]:
        yield from self.global_options
        for state in self.states.values():
            yield from state.options

    @property
    def da_type_map(self) -> dict[str, DAType]:
        return {opt.id: opt.da_type for opt in self.all_options()}

    def verbal_act_count(self) -> int:
        return sum(1 for o in self.all_options() if o.kind is ActionKind.VERBAL)


@dataclass(frozen=True)
class FsmPosition:
    current_state: str
    lock_active: bool = False
    pending_authorization: Optional[str] = None


@dataclass(frozen=True)
class TransitionEvent:
    """What one accepted wizard submission did (free text or option)."""

    action_id: Optional[str]  # None for free text
    typed: bool
    text: Optional[str]


@dataclass(frozen=True)
class TransitionResult:
    new_position: FsmPosition
    rendered_utterance: Optional[str]
    world_commands: tuple[WorldCommand, ...]
    event: TransitionEvent
    slots_used: Mapping[str, str] = field(default_factory=dict)


def initial_position(graph: DialogueGraph) -> FsmPosition:
    state = graph.states[graph.initial_state]
    return FsmPosition(
        current_state=graph.initial_state,
        lock_active=state.lock is not None,
        pending_authorization=state.lock.description if state.lock else None,
    )


def available_actions(
    graph: DialogueGraph, pos: FsmPosition, world: WorldView
) -> list[ActionOption]:
    """Options the wizard may submit right now.

    The current state's options are filtered by their world predicates; while
    the state's lock is active only options marked usable-while-locked remain.
    Global shortcuts are always appended.
    """
    state = graph.states[pos.current_state]
    out = []
    for opt in state.options:
        if pos.lock_active and not opt.while_locked:
            continue
        if all(req.holds(world) for req in opt.requires):
            out.append(opt)
    for opt in graph.global_options:
        if all(req.holds(world) for req in opt.requires):
            out.append(opt)
    return out


def render_template(template: str, slots: Mapping[str, str]) -> str:
    """Substitute {slot} placeholders; raise MissingSlot on an unresolved one."""

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in slots:
            raise MissingSlot(name)
        return str(slots[name])

    return _SLOT_RE.sub(sub, template)


def template_slot_names(template: str) -> set[str]:
    return set(_SLOT_RE.findall(template))


def resolve_slots(
    graph: DialogueGraph,
    option: ActionOption,
    submitted: Mapping[str, str],
    context: Mapping[str, str],
) -> dict[str, str]:
    """Merge slot sources: submitted > session context > scenario defaults."""
    merged: dict[str, str] = dict(graph.slot_defaults)
    merged.update({k: v for k, v in context.items() if v is not None})
    merged.update({k: v for k, v in submitted.items() if v is not None})
    for name in option.required_slots:
        if name not in merged:
            raise MissingSlot(name)
    return merged


def apply_action(
    graph: DialogueGraph,
    pos: FsmPosition,
    action_id: str,
    slots: Mapping[str, str],
    rng: random.Random,
    world: WorldView,
    context: Mapping[str, str] | None = None,
) -> TransitionResult:
    """Apply one predefined option. Deterministic given the rng state.

    Raises ActionUnavailable if the option is not in the currently gated set
    (stale client state) and MissingSlot if a required slot stays unbound
    after merging submitted slots, session context and scenario defaults.
    """
    current = available_actions(graph, pos, world)
    option = next((o for o in current if o.id == action_id), None)
    if option is None:
        raise ActionUnavailable(action_id, pos.current_state)

    bound = resolve_slots(graph, option, slots, context or {})

    utterance: Optional[str] = None
    if option.templates:
        # Uniform pick; a single template draws nothing from the rng.
        idx = rng.randrange(len(option.templates)) if len(option.templates) > 1 else 0
        utterance = render_template(option.templates[idx], bound)

    if option.is_self_loop:
        new_pos = pos
    else:
        target = graph.states[option.target_state]
        new_pos = FsmPosition(
            current_state=option.target_state,
            lock_active=target.lock is not None,
            pending_authorization=target.lock.description if target.lock else None,
        )

    referenced = set(option.required_slots)
    for t in option.templates:
        referenced |= template_slot_names(t)
    for cmd in option.side_effects:
        # Robot commands consume these bindings even when no template does.
        if cmd.kind in ("move_robot", "start_work"):
            referenced |= {"robot", "location"}

    return TransitionResult(
        new_position=new_pos,
        rendered_utterance=utterance,
        world_commands=option.side_effects,
        event=TransitionEvent(action_id=action_id, typed=False, text=utterance),
        slots_used={k: bound[k] for k in sorted(referenced) if k in bound},
    )


def record_free_text(pos: FsmPosition, text: str) -> TransitionResult:
    """A typed wizard message: never moves the FSM, flagged for the %-typed metric."""
    if not text or not text.strip():
        raise EmptyMessage("free-text message is empty")
    return TransitionResult(
        new_position=pos,
        rendered_utterance=text,
        world_commands=(),
        event=TransitionEvent(action_id=None, typed=True, text=text),
    )


def clear_lock(pos: FsmPosition) -> FsmPosition:
    """Operator spoke: the awaited condition is met, the state unlocks."""
    if not pos.lock_active:
        return pos
    return replace(pos, lock_active=False, pending_authorization=None)


def suggest_hint(
    graph: DialogueGraph,
    pos: FsmPosition,
    world: WorldView,
    rng: random.Random,
) -> str:
    """Pick one currently-available state option to highlight.

    Sampling follows the state's hint weights, renormalized over options that
    survived the gating; uniform when no weights are configured. Global
    shortcuts are never suggested.
    """
    state = graph.states[pos.current_state]
    state_ids = {o.id for o in state.options}
    candidates = [o for o in available_actions(graph, pos, world) if o.id in state_ids]
    if not candidates:
        raise NoActionsAvailable(f"no options to hint in state '{pos.current_state}'")
    weights = [state.hint_weights.get(o.id, 1.0) for o in candidates]
    if all(w <= 0 for w in weights):
        weights = [1.0] * len(candidates)
    total = sum(weights)
    draw = rng.random() * total
    acc = 0.0
    for option, w in zip(candidates, weights):
        acc += w
        if draw < acc:
            return option.id
    return candidates[-1].id
