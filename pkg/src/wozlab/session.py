"""Session lifecycle: pairing, role assignment, message/action routing,
outcomes and rewards.

A Session is a single-writer state machine; the service layer serializes all
inbound events (two connections plus the tick scheduler) before calling in.
Methods return Outbound messages for the transport to wrap into envelopes.
"""

from __future__ import annotations

import random
import secrets
import string
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import fsm
from .errors import (
    ActionUnavailable,
    AlreadyClosed,
    DuplicateJoin,
    EmptyMessage,
    NotBothReady,
    WrongPhase,
)
from .scenario import Scenario
from .world import MilestoneEvent, WorldState, format_mmss

TOKEN_ALPHABET = string.ascii_uppercase + string.digits
TOKEN_LENGTH = 10

def generate_token() -> str:
    """10-char upper-case alphanumeric completion token, crypto randomness.

    Bytes >= 252 are rejected so the 36-way mapping stays unbiased.
    """
    out: list[str] = []
    while len(out) < TOKEN_LENGTH:
        for b in secrets.token_bytes(TOKEN_LENGTH):
            if b < 252:
                out.append(TOKEN_ALPHABET[b % 36])
                if len(out) == TOKEN_LENGTH:
                    break
    return "".join(out)


def seeded_token_source(seed: int) -> Callable[[], str]:
    rng = random.Random(seed)
    return lambda: "".join(rng.choice(TOKEN_ALPHABET) for _ in range(TOKEN_LENGTH))


class Role(str, Enum):
    OPERATOR = "operator"
    WIZARD = "wizard"


class Phase(str, Enum):
    INSTRUCTIONS = "instructions"
    PLAYING = "playing"
    QUESTIONNAIRE = "questionnaire"
    CLOSED = "closed"


_PHASE_ORDER = [Phase.INSTRUCTIONS, Phase.PLAYING, Phase.QUESTIONNAIRE, Phase.CLOSED]


class CloseReason(str, Enum):
    COMPLETED = "completed"
    EVACUATED = "evacuated"
    DISCONNECT_OPERATOR = "disconnect_operator"
    DISCONNECT_WIZARD = "disconnect_wizard"
    LOBBY_TIMEOUT = "lobby_timeout"


@dataclass
class RewardConfig:
    base_cents: int = 50
    per_minute_cents: int = 15
    max_minutes: int = 6
    resolve_bonus_cents: int = 20


def compute_reward_cents(
    duration_played_s: float, resolved: bool, cfg: RewardConfig | None = None
) -> int:
    """Tiered pay: base + per completed minute (capped) + resolve bonus.

    Identical for both participants; minutes are floored (conservative).
    """
    cfg = cfg or RewardConfig()
    minutes = min(int(duration_played_s // 60), cfg.max_minutes)
    cents = cfg.base_cents + cfg.per_minute_cents * minutes
    if resolved:
        cents += cfg.resolve_bonus_cents
    return cents


@dataclass
class Participant:
    id: str
    joined_at: float
    role: Optional[Role] = None
    ready: bool = False
    connected: bool = True
    disconnected_at: Optional[float] = None


@dataclass
class SessionOutcome:
    session_id: str
    reason: CloseReason
    duration_played_s: float
    resolved: bool
    progress: dict
    disconnected: Optional[Role]
    reward_cents: int
    token: str

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "reason": self.reason.value,
            "duration_played_s": round(self.duration_played_s, 3),
            "resolved": self.resolved,
            "progress": self.progress,
            "disconnected": self.disconnected.value if self.disconnected else None,
            "reward_cents": self.reward_cents,
            "token": self.token,
        }


@dataclass(frozen=True)
class Outbound:
    """A message for the transport layer: target is a role or 'both'."""

    target: str  # "operator" | "wizard" | "both"
    type: str
    payload: dict


class Lobby:
    """FIFO pairing queue. First of a pair becomes the Operator unless the
    service is configured for seeded random role assignment."""

    def __init__(self, timeout_s: float = 300.0):
        self.timeout_s = timeout_s
        self._queue: deque[Participant] = deque()
        self._known: set[str] = set()

    def enqueue(self, participant: Participant) -> Optional[tuple[Participant, Participant]]:
        if participant.id in self._known:
            raise DuplicateJoin(f"participant '{participant.id}' already queued")
        if self._queue:
            first = self._queue.popleft()
            self._known.discard(first.id)
            return first, participant
        self._queue.append(participant)
        self._known.add(participant.id)
        return None

    def expired(self, now: float) -> list[Participant]:
        out = []
        while self._queue and now - self._queue[0].joined_at >= self.timeout_s:
            p = self._queue.popleft()
            self._known.discard(p.id)
            out.append(p)
        return out

    def forget(self, participant_id: str) -> None:
        self._known.discard(participant_id)
        self._queue = deque(p for p in self._queue if p.id != participant_id)

    def __len__(self) -> int:
        return len(self._queue)


class Session:
    """One paired dialogue: FSM position + world + log events."""

    def __init__(
        self,
        session_id: str,
        scenario: Scenario,
        operator: Participant,
        wizard: Participant,
        rng: random.Random,
        created_at: float,
        instruction_min_s: float = 30.0,
        reward_cfg: RewardConfig | None = None,
        token_source: Callable[[], str] = generate_token,
    ):
        operator.role = Role.OPERATOR
        wizard.role = Role.WIZARD
        self.id = session_id
        self.scenario = scenario
        self.operator = operator
        self.wizard = wizard
        self.rng = rng
        self.created_at = created_at
        self.instruction_min_s = instruction_min_s
        self.reward_cfg = reward_cfg or RewardConfig()
        self.token_source = token_source

        self.phase = Phase.INSTRUCTIONS
        self.position: Optional[fsm.FsmPosition] = None
        self.world: Optional[WorldState] = None
        self.began_at: Optional[float] = None
        self.outcome: Optional[SessionOutcome] = None
        self.token: Optional[str] = None
        self.events: list[dict] = []  # mirrored into the log writer by the service
        self._event_sink: Optional[Callable[[dict], None]] = None
        self._last_pushed_option_ids: Optional[list[str]] = None

    # --- plumbing -----------------------------------------------------------

    def set_event_sink(self, sink: Callable[[dict], None]) -> None:
        self._event_sink = sink

    def _log(self, event: dict) -> None:
        self.events.append(event)
        if self._event_sink:
            self._event_sink(event)

    def participant(self, role: Role) -> Participant:
        return self.operator if role is Role.OPERATOR else self.wizard

    def role_of(self, participant_id: str) -> Optional[Role]:
        if participant_id == self.operator.id:
            return Role.OPERATOR
        if participant_id == self.wizard.id:
            return Role.WIZARD
        return None

    def _advance_phase(self, phase: Phase, now: float) -> None:
        if _PHASE_ORDER.index(phase) < _PHASE_ORDER.index(self.phase):
            raise WrongPhase(f"phase may not move back from {self.phase.value}")
        if phase is not self.phase:
            self._log(
                {"ts": now, "actor": "system", "kind": "phase",
                 "from": self.phase.value, "to": phase.value}
            )
            self.phase = phase

    # --- lifecycle ----------------------------------------------------------

    def mark_ready(self, role: Role, now: float) -> list[Outbound]:
        self.participant(role).ready = True
        return self.maybe_begin(now)

    def maybe_begin(self, now: float) -> list[Outbound]:
        if self.phase is not Phase.INSTRUCTIONS:
            return []
        if not (self.operator.ready and self.wizard.ready):
            return []
        if now - self.created_at < self.instruction_min_s:
            return []
        return self.begin_game(now)

    def begin_game(self, now: float) -> list[Outbound]:
        """Start the countdown and put the wizard at the opening options."""
        if self.phase is not Phase.INSTRUCTIONS:
            raise WrongPhase(f"begin_game in phase {self.phase.value}")
        if not (self.operator.ready and self.wizard.ready):
            raise NotBothReady("both participants must acknowledge the instructions")
        self._advance_phase(Phase.PLAYING, now)
        self.began_at = now
        self.world = WorldState(self.scenario.world, now)
        self.position = fsm.initial_position(self.scenario.graph)
        out = [
            Outbound("both", "timer", self._timer_payload(now)),
            self._options_outbound(now),
        ]
        return out

    # --- inbound events -----------------------------------------------------

    def handle_operator_message(self, text: str, now: float) -> list[Outbound]:
        if self.phase is not Phase.PLAYING:
            raise WrongPhase("chat is only routed during the game")
        if not text or not text.strip():
            raise EmptyMessage("operator message is empty")
        out = [self._chat("operator", text, typed=True)]
        self._log(
            {"ts": now, "actor": "operator", "kind": "chat", "text": text, "typed": True}
        )
        if self.position and self.position.lock_active:
            self.position = fsm.clear_lock(self.position)
            self._log(
                {"ts": now, "actor": "system", "kind": "lock", "state": "cleared",
                 "fsm_state": self.position.current_state}
            )
        out.append(self._options_outbound(now))
        return out

    def handle_wizard_action(
        self, action_id: str, slots: dict, now: float
    ) -> list[Outbound]:
        if self.phase is not Phase.PLAYING:
            raise WrongPhase("actions are only routed during the game")
        assert self.position is not None and self.world is not None
        before = self.position
        graph = self.scenario.graph

        # Clients may only bind the option's declared slots; anything else
        # (say, overriding the context robot of a work action) is dropped.
        option = graph.find_option(action_id)
        if option is not None:
            slots = {k: v for k, v in slots.items() if k in option.required_slots}

        result = fsm.apply_action(
            graph, before, action_id, slots, self.rng, self.world,
            self.world.context_slots(now),
        )
        # Pre-flight before anything is committed: a robot slot must name a
        # real robot, so side-effect execution below cannot fail halfway.
        for cmd in result.world_commands:
            if cmd.kind in ("move_robot", "start_work"):
                robot = result.slots_used.get("robot")
                if robot not in self.world.robots:
                    raise ActionUnavailable(action_id, before.current_state)

        self.position = result.new_position
        option = graph.option(action_id)
        self._log(
            {
                "ts": now, "actor": "wizard", "kind": "wizard_option",
                "dialogue_act": action_id, "da_type": option.da_type.value,
                "typed": False, "text": result.rendered_utterance,
                "fsm_state_before": before.current_state,
                "fsm_state_after": self.position.current_state,
            }
        )
        lock_armed = result.new_position.lock_active and not before.lock_active

        instant_events: list[MilestoneEvent] = []
        for cmd in result.world_commands:
            _task, fired = self.world.execute_command(cmd, result.slots_used, now)
            self._log(
                {
                    "ts": now, "actor": "wizard", "kind": "world_command",
                    "command": {"kind": cmd.kind, "action": cmd.action, "event": cmd.event},
                    "slots": dict(result.slots_used),
                    "world_snapshot": self.world.snapshot(now),
                }
            )
            for ev in fired:
                instant_events.append(ev)
                self._log(
                    {
                        "ts": now, "actor": "system", "kind": "milestone",
                        "event_id": ev.id, "event_kind": ev.kind.value,
                        "narration": ev.narration, "media_ref": ev.media_ref,
                    }
                )
        if lock_armed:
            self._log(
                {"ts": now, "actor": "system", "kind": "lock", "state": "armed",
                 "awaits": self.scenario.graph.states[self.position.current_state].lock.awaits.value,
                 "fsm_state": self.position.current_state}
            )

        out: list[Outbound] = []
        if result.rendered_utterance is not None:
            out.append(
                self._chat(
                    "wizard", result.rendered_utterance, typed=False,
                    dialogue_act=action_id, da_type=option.da_type.value,
                )
            )
        for ev in instant_events:
            out.append(self._world_event_outbound(ev, now))
        out.append(self._options_outbound(now))
        return out

    def handle_wizard_free_text(self, text: str, now: float) -> list[Outbound]:
        if self.phase is not Phase.PLAYING:
            raise WrongPhase("free text is only routed during the game")
        assert self.position is not None
        result = fsm.record_free_text(self.position, text)
        self.position = result.new_position
        self._log(
            {
                "ts": now, "actor": "wizard", "kind": "wizard_free_text",
                "typed": True, "text": text,
                "fsm_state_before": result.new_position.current_state,
                "fsm_state_after": result.new_position.current_state,
            }
        )
        return [self._chat("wizard", text, typed=True)]

    def request_hint(self, now: float) -> list[Outbound]:
        if self.phase is not Phase.PLAYING:
            raise WrongPhase("hints are only available during the game")
        assert self.position is not None and self.world is not None
        action_id = fsm.suggest_hint(
            self.scenario.graph, self.position, self.world, self.rng
        )
        self._log({"ts": now, "actor": "wizard", "kind": "hint", "hint_action": action_id})
        return [Outbound(Role.WIZARD.value, "hint_highlight", {"action": action_id})]

    def handle_disconnect(self, role: Role, now: float) -> None:
        p = self.participant(role)
        p.connected = False
        p.disconnected_at = now

    def handle_reconnect(self, role: Role) -> None:
        p = self.participant(role)
        p.connected = True
        p.disconnected_at = None

    # --- time ----------------------------------------------------------------

    def tick(self, now: float, disconnect_grace_s: float = 30.0) -> list[Outbound]:
        out: list[Outbound] = []
        if self.phase is Phase.INSTRUCTIONS:
            out.extend(self.maybe_begin(now))
            return out
        if self.phase is not Phase.PLAYING:
            return []
        assert self.world is not None

        for ev in self.world.tick(now):
            self._log(
                {
                    "ts": now, "actor": "system", "kind": "milestone",
                    "event_id": ev.id, "event_kind": ev.kind.value,
                    "narration": ev.narration, "media_ref": ev.media_ref,
                }
            )
            out.append(self._world_event_outbound(ev, now))

        out.append(Outbound("both", "timer", self._timer_payload(now)))

        for role in (Role.OPERATOR, Role.WIZARD):
            p = self.participant(role)
            if (
                not p.connected
                and p.disconnected_at is not None
                and now - p.disconnected_at >= disconnect_grace_s
            ):
                reason = (
                    CloseReason.DISCONNECT_OPERATOR
                    if role is Role.OPERATOR
                    else CloseReason.DISCONNECT_WIZARD
                )
                out.extend(self.close(reason, now))
                return out

        if now >= self.world.deadline:
            resolved = self.world.progress()["resolved"]
            reason = CloseReason.COMPLETED if resolved else CloseReason.EVACUATED
            out.extend(self.close(reason, now))
            return out

        # Waiting-state option sets change when tasks finish; push on change.
        refreshed = self._options_outbound(now, only_if_changed=True)
        if refreshed is not None:
            out.append(refreshed)
        return out

    # --- closing ---------------------------------------------------------------

    def close(self, reason: CloseReason, now: float) -> list[Outbound]:
        if self.outcome is not None:
            raise AlreadyClosed(f"session {self.id} already closed")
        progress = self.world.progress() if self.world else {
            "located": False, "resolved": False, "assessed": False, "evacuated": False,
        }
        duration = 0.0
        if self.began_at is not None:
            duration = min(now - self.began_at, self.scenario.world.time_limit_s)
        disconnected = None
        if reason is CloseReason.DISCONNECT_OPERATOR:
            disconnected = Role.OPERATOR
        elif reason is CloseReason.DISCONNECT_WIZARD:
            disconnected = Role.WIZARD

        self.token = self.token_source()
        self.outcome = SessionOutcome(
            session_id=self.id,
            reason=reason,
            duration_played_s=duration,
            resolved=progress["resolved"],
            progress=progress,
            disconnected=disconnected,
            reward_cents=compute_reward_cents(duration, progress["resolved"], self.reward_cfg),
            token=self.token,
        )
        self._advance_phase(Phase.QUESTIONNAIRE, now)
        payload = {
            "reason": reason.value,
            "resolved": progress["resolved"],
            "token": self.token,
            "reward_cents": self.outcome.reward_cents,
            "duration_s": round(duration, 3),
            "questionnaire_url": "/questionnaire",
        }
        return [Outbound("both", "session_end", payload)]

    # --- outbound builders ------------------------------------------------------

    def _chat(self, actor: str, text: str, typed: bool, **extra) -> Outbound:
        payload = {"actor": actor, "text": text, "typed": typed}
        payload.update(extra)
        return Outbound("both", "chat", payload)

    def _world_event_outbound(self, ev: MilestoneEvent, now: float) -> Outbound:
        return Outbound(
            "both",
            "world_event",
            {
                "event": ev.id,
                "kind": ev.kind.value,
                "narration": ev.narration,
                "media_ref": ev.media_ref,
            },
        )

    def _timer_payload(self, now: float) -> dict:
        assert self.world is not None
        return {
            "remaining_s": int(self.world.remaining_time(now)),
            "remaining": format_mmss(self.world.remaining_time(now)),
            "phase": self.phase.value,
        }

    def current_options(self, now: float) -> list[dict]:
        assert self.position is not None and self.world is not None
        context = self.world.context_slots(now)
        idle_robots = [
            rid for rid, r in sorted(self.world.robots.items())
            if r.status.value == "idle"
        ]
        choice_sources = {
            "robot": idle_robots,
            "location": list(self.scenario.world.locations),
        }
        global_ids = {o.id for o in self.scenario.graph.global_options}
        options = []
        for opt in fsm.available_actions(self.scenario.graph, self.position, self.world):
            preview = None
            if opt.templates:
                merged = dict(self.scenario.graph.slot_defaults)
                merged.update(context)
                preview = _lenient_render(opt.templates[0], merged)
            options.append(
                {
                    "id": opt.id,
                    "kind": opt.kind.value,
                    "da_type": opt.da_type.value,
                    "global": opt.id in global_ids,
                    "preview": preview,
                    "slots": {s: choice_sources.get(s, []) for s in opt.required_slots},
                }
            )
        return options

    def _options_outbound(self, now: float, only_if_changed: bool = False):
        options = self.current_options(now)
        ids = [o["id"] for o in options]
        if only_if_changed and ids == self._last_pushed_option_ids:
            return None
        self._last_pushed_option_ids = ids
        assert self.position is not None
        return Outbound(
            Role.WIZARD.value,
            "action_options",
            {
                "state": self.position.current_state,
                "locked": self.position.lock_active,
                "pending": self.position.pending_authorization,
                "options": options,
            },
        )


def _lenient_render(template: str, slots: dict) -> str:
    """Preview rendering: leave unknown slots as visible placeholders."""
    out = template
    for name, value in slots.items():
        out = out.replace("{" + name + "}", str(value))
    return out
